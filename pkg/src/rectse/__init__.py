"""Linear rectangular-coordinate state estimation for power networks with mixed
RTU and PMU measurements, including normalized-residual bad data correction."""

from importlib import resources

from .cases import (Branch, Bus, CaseError, NetworkCase, load_case, parse_case,
                    rotate_to_reference, serialize_case)
from .estimator import (AllCriticalError, BadDataEvent, EstimationError,
                        EstimationReport, StateVector, UnobservableError,
                        lnr_step, residual_covariance_diag, run, solve_wls)
from .measurements import (MeasurementError, MeasurementModel, MeasurementRow,
                           RawReading, assemble, predict_readings, pseudo_variance)
from .network import (ComponentCurrentModel, IncidenceIndex, ModelError,
                      build_models, injected_current, true_measurement_values)

__version__ = "0.1.0"


def bundled_case_path(name: str) -> str:
    """Filesystem path of a bundled benchmark case (e.g. "ieee14")."""
    for suffix in (".json", ".m"):
        ref = resources.files("rectse.data") / f"{name}{suffix}"
        if ref.is_file():
            return str(ref)
    raise CaseError(f"no bundled case named {name!r}")
