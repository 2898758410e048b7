"""Experiment harness: measurement generation, bad data injection, Monte Carlo
campaigns and the two accuracy indices (state error sum and the estimated-vs-raw
measurement variance ratio)."""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import estimator
from .cases import NetworkCase, load_case, rotate_to_reference
from .measurements import (MeasurementError, RawReading, assemble,
                           predict_readings, readings_from_json)
from .network import (branch_lookup, branch_position, build_models, state_index,
                      true_measurement_values)

SIGMA_DEFAULTS = {"pmu": 0.0002, "rtu_v": 0.004, "rtu_pq": 0.01}

# Per-size targets (PMU voltages, PMU currents, RTU voltages, injections, flows)
# for the bundled benchmark cases; other sizes fall back to proportional counts.
TABLE1_COUNTS = {
    14: (5, 14, 11, 10, 36),
    57: (13, 40, 47, 50, 112),
    118: (19, 76, 106, 96, 298),
    2869: (409, 1362, 2652, 2596, 5134),
}


class HarnessError(Exception):
    pass


@dataclass(frozen=True)
class Placement:
    """Where devices sit.  Current/flow slots are (from, to, side_bus, ckt)."""

    pmu_buses: tuple[int, ...]
    pmu_currents: tuple[tuple[int, int, int, int], ...]
    rtu_v_buses: tuple[int, ...]
    rtu_inj_buses: tuple[int, ...]
    rtu_flows: tuple[tuple[int, int, int, int], ...]


def _degrees(case: NetworkCase) -> dict[int, int]:
    deg = {b.id: 0 for b in case.buses}
    for br in case.branches:
        if br.status:
            deg[br.from_bus] += 1
            deg[br.to_bus] += 1
    return deg


def _slots_by_bus(case: NetworkCase) -> dict[int, list[tuple[int, int, int, int]]]:
    """(from, to, side, ckt) slots for every bus's incident branches, case order."""
    seen: dict[tuple[int, int], int] = {}
    slots: dict[int, list[tuple[int, int, int, int]]] = {b.id: [] for b in case.buses}
    for br in case.branches:
        if not br.status:
            continue
        key = (min(br.from_bus, br.to_bus), max(br.from_bus, br.to_bus))
        ckt = seen.get(key, 0)
        seen[key] = ckt + 1
        slots[br.from_bus].append((br.from_bus, br.to_bus, br.from_bus, ckt))
        if br.to_bus != br.from_bus:
            slots[br.to_bus].append((br.from_bus, br.to_bus, br.to_bus, ckt))
    return slots


def _incident_slots(case: NetworkCase, bus: int):
    """(from, to, side, ckt) slots for branches incident to a bus, case order."""
    return _slots_by_bus(case)[bus]


def table1_placement(case: NetworkCase, counts: tuple[int, ...] | None = None) -> Placement:
    """Deterministic benchmark placement: PMUs at the reference bus and then the
    highest-degree buses, RTU voltages preferring non-PMU buses, flow meters
    spread round-robin so every RTU voltage feeds at least one pseudo pair."""
    n = case.n_buses
    if counts is None:
        counts = TABLE1_COUNTS.get(
            n, (max(1, n * 15 // 100), max(1, n * 48 // 100),
                max(1, n * 92 // 100), max(1, n * 90 // 100), max(1, n * 180 // 100)))
    n_pmu_v, n_pmu_i, n_rtu_v, n_rtu_inj, n_rtu_flow = counts
    deg = _degrees(case)
    by_degree = sorted(deg, key=lambda b: (-deg[b], b))

    # PMU buses: reference first, then greedily the bus that brings the most
    # not-yet-covered neighbours into PMU reach (each PMU monitors all its
    # incident lines, so coverage of distinct buses is what buys accuracy).
    neighbours: dict[int, set[int]] = {b.id: set() for b in case.buses}
    for br in case.branches:
        if br.status:
            neighbours[br.from_bus].add(br.to_bus)
            neighbours[br.to_bus].add(br.from_bus)
    pmu_list = [case.reference_bus]
    covered = {case.reference_bus} | neighbours[case.reference_bus]
    while len(pmu_list) < min(n_pmu_v, n):
        best = None
        best_key = None
        for b in by_degree:
            if b in pmu_list:
                continue
            gain = len((neighbours[b] | {b}) - covered)
            key = (-gain, -deg[b], b)
            if best_key is None or key < best_key:
                best, best_key = b, key
        pmu_list.append(best)
        covered |= neighbours[best] | {best}
    pmu_buses = tuple(pmu_list)

    # One current phasor per distinct line first, channels handed out
    # round-robin across PMU buses so no bus monopolizes the budget, then
    # second-side duplicates if the target asks for more.
    slots_by_bus = _slots_by_bus(case)
    per_pmu = [list(slots_by_bus[bus]) for bus in pmu_buses]
    primary, secondary, taken = [], [], set()
    round_i = 0
    while any(round_i < len(s) for s in per_pmu):
        for slots in per_pmu:
            if round_i >= len(slots):
                continue
            slot = slots[round_i]
            bf, bt, _, ckt = slot
            key = (min(bf, bt), max(bf, bt), ckt)
            if key in taken:
                secondary.append(slot)
            else:
                taken.add(key)
                primary.append(slot)
        round_i += 1
    pmu_currents = tuple((primary + secondary)[:n_pmu_i])

    pmu_set = set(pmu_buses)
    rtu_order = ([b for b in by_degree if b not in pmu_set]
                 + [b for b in by_degree if b in pmu_set])
    rtu_v_buses = tuple(rtu_order[:min(n_rtu_v, n)])
    rtu_inj_buses = tuple(rtu_v_buses[:min(n_rtu_inj, len(rtu_v_buses))])

    per_bus = [list(slots_by_bus[bus]) for bus in rtu_v_buses]
    flows = []
    round_i = 0
    while len(flows) < n_rtu_flow and any(per_bus):
        advanced = False
        for bus_slots in per_bus:
            if round_i < len(bus_slots) and len(flows) < n_rtu_flow:
                flows.append(bus_slots[round_i])
                advanced = True
        if not advanced:
            break
        round_i += 1
    return Placement(pmu_buses=pmu_buses, pmu_currents=pmu_currents,
                     rtu_v_buses=rtu_v_buses, rtu_inj_buses=rtu_inj_buses,
                     rtu_flows=tuple(flows))


def _sigma_for(kind: str, truth: float, sigmas: dict[str, float]) -> float:
    if kind in ("V_R", "V_I", "I_R_flow", "I_I_flow", "I_R_inj", "I_I_inj"):
        frac = sigmas["pmu"]
    elif kind == "V_mag":
        frac = sigmas["rtu_v"]
    else:
        frac = sigmas["rtu_pq"]
    return frac * max(abs(truth), 1.0)


def generate_readings(case: NetworkCase, placement: Placement,
                      sigmas: dict[str, float] | None = None,
                      noise: str = "uniform",
                      rng: np.random.Generator | None = None) -> list[RawReading]:
    """Draw a measurement set around the case's truth profile.

    noise="uniform" draws each value uniformly from [truth - sigma, truth + sigma];
    "gaussian" draws from N(truth, sigma^2); "none" returns exact truths.
    """
    if noise not in ("uniform", "gaussian", "none"):
        raise HarnessError(f"unknown noise model {noise!r}")
    sigmas = dict(SIGMA_DEFAULTS, **(sigmas or {}))
    for k, v in sigmas.items():
        if not v > 0:
            raise HarnessError(f"sigma fraction {k} must be positive")
    if rng is None:
        rng = np.random.default_rng(0)
    models, incidence = build_models(case)
    truth = true_measurement_values(case, models, incidence)
    lookup = branch_lookup(models)

    specs: list[tuple[str, str, str, int, int | None, int | None, int, float]] = []

    def spec(rid, device, kind, bus, truth_value, bf=None, bt=None, ckt=0):
        specs.append((rid, device, kind, bus, bf, bt, ckt, truth_value))

    for bus in placement.pmu_buses:
        v = truth.v_complex[bus]
        spec(f"pmu_vr_b{bus}", "PMU", "V_R", bus, v.real)
        if bus != case.reference_bus:
            spec(f"pmu_vi_b{bus}", "PMU", "V_I", bus, v.imag)
    for bf, bt, side, ckt in placement.pmu_currents:
        pos, s = branch_position(models, bf, bt, side, ckt, lookup=lookup)
        cur = truth.i_flow[pos, s]
        tag = f"l{bf}-{bt}c{ckt}_b{side}"
        spec(f"pmu_ir_{tag}", "PMU", "I_R_flow", side, cur.real, bf, bt, ckt)
        spec(f"pmu_ii_{tag}", "PMU", "I_I_flow", side, cur.imag, bf, bt, ckt)
    for bus in placement.rtu_v_buses:
        spec(f"rtu_v_b{bus}", "RTU", "V_mag", bus, truth.v_mag[bus])
    for bus in placement.rtu_inj_buses:
        spec(f"rtu_p_b{bus}", "RTU", "P_inj", bus, truth.p_inj[bus])
        spec(f"rtu_q_b{bus}", "RTU", "Q_inj", bus, truth.q_inj[bus])
    for bf, bt, side, ckt in placement.rtu_flows:
        pos, s = branch_position(models, bf, bt, side, ckt, lookup=lookup)
        tag = f"l{bf}-{bt}c{ckt}_b{side}"
        spec(f"rtu_pf_{tag}", "RTU", "P_flow", side, truth.p_flow[pos, s], bf, bt, ckt)
        spec(f"rtu_qf_{tag}", "RTU", "Q_flow", side, truth.q_flow[pos, s], bf, bt, ckt)

    readings = []
    for rid, device, kind, bus, bf, bt, ckt, z_t in specs:
        sigma = _sigma_for(kind, z_t, sigmas)
        if noise == "uniform":
            value = z_t + rng.uniform(-sigma, sigma)
        elif noise == "gaussian":
            value = z_t + rng.normal(0.0, sigma)
        else:
            value = z_t
        readings.append(RawReading(id=rid, device=device, kind=kind, bus=bus,
                                   value=value, sigma=sigma,
                                   branch_from=bf, branch_to=bt, ckt=ckt))
    return readings


def _matches(reading: RawReading, selector: dict) -> bool:
    for key, want in selector.items():
        if key in ("branch_from", "branch_to"):
            continue
        if getattr(reading, key, None) != want:
            return False
    if "branch_from" in selector or "branch_to" in selector:
        want_ends = {selector.get("branch_from"), selector.get("branch_to")} - {None}
        have_ends = {reading.branch_from, reading.branch_to} - {None}
        if not want_ends <= have_ends:
            return False
    return True


def inject_bad_data(readings: list[RawReading],
                    alterations: list[tuple[dict, float]]) -> list[RawReading]:
    """Scale selected readings by (1 + alteration); each selector must match
    exactly one reading.  Untouched readings are returned as-is."""
    out = list(readings)
    for selector, alteration in alterations:
        if not math.isfinite(alteration):
            raise HarnessError(f"non-finite alteration for {selector}")
        hits = [i for i, rd in enumerate(out) if _matches(rd, selector)]
        if len(hits) != 1:
            raise HarnessError(
                f"selector {selector} matched {len(hits)} readings, expected 1")
        rd = out[hits[0]]
        out[hits[0]] = RawReading(
            id=rd.id, device=rd.device, kind=rd.kind, bus=rd.bus,
            value=rd.value * (1.0 + alteration), sigma=rd.sigma,
            branch_from=rd.branch_from, branch_to=rd.branch_to, ckt=rd.ckt)
    return out


def index_sigma2x(x_hat: np.ndarray, x_true: np.ndarray) -> float:
    """Sum of squared state errors over the 2N-1 estimated entries (the fixed
    reference imaginary voltage contributes zero)."""
    if x_hat.shape != x_true.shape:
        raise HarnessError(f"state dimension mismatch {x_hat.shape} vs {x_true.shape}")
    d = x_hat - x_true
    return float(d @ d)


def index_xi(z_hat: np.ndarray, z_meas: np.ndarray, z_true: np.ndarray) -> float | None:
    """Ratio of estimated-value error energy to raw-measurement error energy over
    the original reading set; None signals the exact-fit (0/0) case."""
    denom = float(np.sum((z_meas - z_true) ** 2))
    # Exact readings can still differ from the evaluated truth by rounding,
    # so the exact-fit guard is relative rather than a strict zero test.
    if denom <= 1e-24 * max(1.0, float(np.sum(z_true ** 2))):
        return None
    return float(np.sum((z_hat - z_true) ** 2)) / denom


def pmu_polar_to_rect(mag: float, ang: float, sigma_mag: float,
                      sigma_ang: float) -> tuple[float, float, float, float]:
    """Convert a polar phasor reading to rectangular components with first-order
    error propagation (for PMUs that report magnitude/angle)."""
    re, im = mag * math.cos(ang), mag * math.sin(ang)
    var_re = (math.cos(ang) * sigma_mag) ** 2 + (mag * math.sin(ang) * sigma_ang) ** 2
    var_im = (math.sin(ang) * sigma_mag) ** 2 + (mag * math.cos(ang) * sigma_ang) ** 2
    return re, im, math.sqrt(var_re), math.sqrt(var_im)


@dataclass
class ScenarioConfig:
    case_path: str
    measurements_path: str | None = None
    recipe: str = "table1"
    counts: tuple[int, ...] | None = None
    sigmas: dict[str, float] = field(default_factory=dict)
    noise: str = "uniform"
    trials: int = 1
    seed: int = 0
    bad_data: list[tuple[dict, float]] = field(default_factory=list)
    q: float = 3.0
    mode: str = "correct"
    max_iterations: int = 50

    def __post_init__(self):
        if self.trials < 1:
            raise HarnessError("trials must be >= 1")

    @classmethod
    def from_json(cls, path: str) -> "ScenarioConfig":
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        bad = [(entry["selector"], float(entry["alteration"]))
               for entry in doc.get("bad_data", [])]
        return cls(case_path=doc["case"],
                   measurements_path=doc.get("measurements"),
                   recipe=doc.get("recipe", "table1"),
                   counts=tuple(doc["counts"]) if "counts" in doc else None,
                   sigmas=doc.get("sigmas", {}),
                   noise=doc.get("noise", "uniform"),
                   trials=int(doc.get("trials", 1)),
                   seed=int(doc.get("seed", 0)),
                   bad_data=bad,
                   q=float(doc.get("q", 3.0)),
                   mode=doc.get("mode", "correct"),
                   max_iterations=int(doc.get("max_iterations", 50)))


@dataclass(frozen=True)
class TrialResult:
    trial: int
    sigma2_x: float | None
    xi: float | None
    solve_ms: float
    detect_ms: float
    iterations: int
    events: int
    error: str | None = None


@dataclass(frozen=True)
class CampaignResult:
    trials: tuple[TrialResult, ...]
    mean_sigma2_x: float | None
    std_sigma2_x: float | None
    mean_xi: float | None
    state_errors: tuple[tuple[int, float, float], ...]   # (bus, |dVr|, |dVi|) of trial 0


def run_campaign(config: ScenarioConfig,
                 case: NetworkCase | None = None) -> CampaignResult:
    """Monte Carlo campaign with a fixed placement and per-trial derived rng
    streams (trial k sees the same draws regardless of execution order)."""
    if case is None:
        case = load_case(config.case_path)
    case = rotate_to_reference(case)
    models, incidence = build_models(case)
    index = state_index(case)
    x_true = index.state_from_case(case)

    if config.measurements_path is not None:
        with open(config.measurements_path, "r", encoding="utf-8") as fh:
            base_readings = readings_from_json(json.load(fh))
        placement = None
    else:
        if config.recipe != "table1":
            raise HarnessError(f"unknown placement recipe {config.recipe!r}")
        placement = table1_placement(case, config.counts)
        base_readings = None

    streams = np.random.SeedSequence(config.seed).spawn(config.trials)
    z_true_cache: np.ndarray | None = None
    trial_rows: list[TrialResult] = []
    state_errors: tuple[tuple[int, float, float], ...] = ()

    for k in range(config.trials):
        rng = np.random.default_rng(streams[k])
        try:
            if placement is not None:
                readings = generate_readings(case, placement, config.sigmas,
                                             config.noise, rng)
            else:
                readings = list(base_readings)  # fixed externally supplied set
            if config.bad_data:
                readings = inject_bad_data(readings, config.bad_data)
            if z_true_cache is None:
                truth_v = {b.id: complex(b.v_true_mag * math.cos(b.v_true_ang),
                                         b.v_true_mag * math.sin(b.v_true_ang))
                           for b in case.buses}
                z_true_cache = predict_readings(readings, models, incidence, truth_v)
            model = assemble(case, models, incidence, readings)
            report = estimator.run(model, q=config.q, mode=config.mode,
                                   max_iterations=config.max_iterations)
            if not report.converged:
                raise estimator.EstimationError(
                    f"LNR loop did not converge in {config.max_iterations} iterations")
            x_hat = report.state.as_vector()
            s2x = index_sigma2x(x_hat, x_true)
            z_hat = predict_readings(readings, models, incidence,
                                     report.state.complex_voltages())
            z_meas = np.array([rd.value for rd in readings])
            xi = index_xi(z_hat, z_meas, z_true_cache)
            trial_rows.append(TrialResult(
                trial=k, sigma2_x=s2x, xi=xi,
                solve_ms=report.solve_time * 1e3, detect_ms=report.detect_time * 1e3,
                iterations=report.iterations, events=len(report.events)))
            if k == 0:
                n = index.n_buses
                errs = []
                for i, b in enumerate(index.bus_ids):
                    dvr = abs(x_hat[i] - x_true[i])
                    vi = index.vi(b)
                    dvi = 0.0 if vi is None else abs(x_hat[vi] - x_true[vi])
                    errs.append((b, dvr, dvi))
                state_errors = tuple(errs)
        except (estimator.EstimationError, MeasurementError, HarnessError) as exc:
            trial_rows.append(TrialResult(trial=k, sigma2_x=None, xi=None,
                                          solve_ms=0.0, detect_ms=0.0,
                                          iterations=0, events=0, error=str(exc)))

    good_s2x = [t.sigma2_x for t in trial_rows if t.sigma2_x is not None]
    good_xi = [t.xi for t in trial_rows if t.xi is not None]
    return CampaignResult(
        trials=tuple(trial_rows),
        mean_sigma2_x=float(np.mean(good_s2x)) if good_s2x else None,
        std_sigma2_x=float(np.std(good_s2x)) if good_s2x else None,
        mean_xi=float(np.mean(good_xi)) if good_xi else None,
        state_errors=state_errors)


def write_campaign_csv(result: CampaignResult, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("trial,sigma2_x,xi,solve_ms,detect_ms,iterations,events\n")
        for t in result.trials:
            s2x = "" if t.sigma2_x is None else repr(t.sigma2_x)
            xi = "" if t.xi is None else repr(t.xi)
            fh.write(f"{t.trial},{s2x},{xi},{t.solve_ms:.6f},{t.detect_ms:.6f},"
                     f"{t.iterations},{t.events}\n")


def write_state_errors(result: CampaignResult, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# bus  abs_dV_real  abs_dV_imag\n")
        for bus, dvr, dvi in result.state_errors:
            fh.write(f"{bus} {dvr:.12e} {dvi:.12e}\n")
