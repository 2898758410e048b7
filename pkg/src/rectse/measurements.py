"""Assembly of the linear measurement model (z, H, R) from raw readings.

PMU readings map one-to-one onto linear rows.  Each RTU group of (voltage
magnitude, P, Q) at a bus or line end becomes two zero-valued KCL
pseudo-measurement rows whose coefficients embed P/V^2 and Q/V^2 together with
the incident component current models.  RTU power values use the
received-at-bus sign convention (positive = consumed at the metering bus), so
the pseudo rows evaluate to zero at the true state for exact readings.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix

from .cases import NetworkCase
from .network import (ComponentCurrentModel, IncidenceIndex, ModelError, Row,
                      StateIndex, branch_lookup, branch_position, injection_rows,
                      injected_current_complex, state_index)

PMU_KINDS = ("V_R", "V_I", "I_R_inj", "I_I_inj", "I_R_flow", "I_I_flow")
RTU_KINDS = ("V_mag", "P_inj", "Q_inj", "P_flow", "Q_flow")
ZERO_POWER_GUARD = 1e-6   # |W| below this floors the W/V^2 variance at sigma_W^2


class MeasurementError(Exception):
    """Raised for inconsistent or unmappable raw readings."""


@dataclass(frozen=True)
class RawReading:
    """One original device value, the unit bad data is injected into."""

    id: str
    device: str                  # "PMU" or "RTU"
    kind: str
    bus: int                     # metering bus (side bus for flow kinds)
    value: float
    sigma: float
    branch_from: int | None = None
    branch_to: int | None = None
    ckt: int = 0

    def __post_init__(self):
        if self.device not in ("PMU", "RTU"):
            raise MeasurementError(f"reading {self.id}: unknown device {self.device}")
        allowed = PMU_KINDS if self.device == "PMU" else RTU_KINDS
        if self.kind not in allowed:
            raise MeasurementError(
                f"reading {self.id}: kind {self.kind} not valid for {self.device}")
        if not self.sigma > 0:
            raise MeasurementError(f"reading {self.id}: sigma must be positive")
        if self.kind.endswith("_flow") and (self.branch_from is None or self.branch_to is None):
            raise MeasurementError(f"reading {self.id}: flow reading needs a branch")

    @property
    def is_flow(self) -> bool:
        return self.kind.endswith("_flow")


@dataclass(frozen=True)
class MeasurementRow:
    row_id: int
    kind: str
    z_value: float
    variance: float
    coeffs: Row
    sources: tuple[str, ...]


@dataclass(frozen=True)
class MeasurementModel:
    rows: tuple[MeasurementRow, ...]
    state_dim: int
    reference_bus: int
    index: StateIndex = field(repr=False)

    @property
    def m(self) -> int:
        return len(self.rows)

    def matrices(self) -> tuple[csr_matrix, np.ndarray, np.ndarray]:
        """Stacked (H, z, diag R) in row order."""
        data, indices, indptr = [], [], [0]
        for row in self.rows:
            for i, c in row.coeffs:
                indices.append(i)
                data.append(c)
            indptr.append(len(indices))
        H = csr_matrix((np.asarray(data), np.asarray(indices, dtype=np.int64),
                        np.asarray(indptr, dtype=np.int64)),
                       shape=(len(self.rows), self.state_dim))
        z = np.array([row.z_value for row in self.rows])
        r = np.array([row.variance for row in self.rows])
        return H, z, r


def pseudo_variance(v: float, sigma_v: float, w: float, sigma_w: float) -> float:
    """First-order variance of W/V^2, chaining the product rule on V*V with the
    quotient rule on W/V^2.  Near-zero W floors the result at sigma_W^2 to keep
    the weight matrix positive definite."""
    if abs(w) < ZERO_POWER_GUARD:
        return sigma_w * sigma_w
    f = w / (v * v)
    return f * f * ((sigma_w / w) ** 2 + 2.0 * (sigma_v / v) ** 2)


def _locate(models, reading: RawReading, lookup=None) -> tuple[int, str]:
    try:
        return branch_position(models, reading.branch_from, reading.branch_to,
                               reading.bus, reading.ckt, lookup=lookup)
    except ModelError as exc:
        raise MeasurementError(f"reading {reading.id}: {exc}") from exc


def assemble(case: NetworkCase, models: list[ComponentCurrentModel],
             incidence: IncidenceIndex, readings: list[RawReading]) -> MeasurementModel:
    """Build the measurement model.  Row order is deterministic: PMU rows in
    input order, then RTU pseudo pairs in input order (real before imaginary)."""
    index = state_index(case)
    known_buses = set(index.bus_ids)
    seen_ids = set()
    for rd in readings:
        if rd.id in seen_ids:
            raise MeasurementError(f"duplicate reading id {rd.id}")
        seen_ids.add(rd.id)
        if rd.bus not in known_buses:
            raise MeasurementError(f"reading {rd.id}: unknown bus {rd.bus}")

    lookup = branch_lookup(models)
    rtu_v = {rd.bus: rd for rd in readings if rd.device == "RTU" and rd.kind == "V_mag"}
    # Pair up RTU P/Q readings by their metered element, in input order.
    pairs: dict[tuple, dict[str, RawReading]] = {}
    order: list[tuple] = []
    for rd in readings:
        if rd.device != "RTU" or rd.kind == "V_mag":
            continue
        if rd.bus not in rtu_v:
            raise MeasurementError(
                f"reading {rd.id}: RTU power at bus {rd.bus} without a V_mag reading")
        if rd.is_flow:
            pos, side = _locate(models, rd, lookup)
            key = ("flow", pos, side)
        else:
            key = ("inj", rd.bus)
        slot = "P" if rd.kind.startswith("P") else "Q"
        entry = pairs.setdefault(key, {})
        if slot in entry:
            raise MeasurementError(
                f"reading {rd.id}: duplicate RTU {slot} reading for its element")
        if not entry:
            order.append(key)
        entry[slot] = rd

    rows: list[MeasurementRow] = []

    def add(kind, z, var, coeffs, sources):
        if not coeffs:
            raise MeasurementError(
                f"measurement {kind} from {sources} maps to no state (empty row)")
        rows.append(MeasurementRow(row_id=len(rows), kind=kind, z_value=z,
                                   variance=var, coeffs=coeffs, sources=sources))

    for rd in readings:
        if rd.device != "PMU":
            continue
        var = rd.sigma * rd.sigma
        src = (rd.id,)
        if rd.kind == "V_R":
            add("PMU_VR", rd.value, var, ((index.vr(rd.bus), 1.0),), src)
        elif rd.kind == "V_I":
            vi = index.vi(rd.bus)
            if vi is None:
                raise MeasurementError(
                    f"reading {rd.id}: imaginary voltage at the reference bus is "
                    "fixed by the angle reference and cannot be a measurement")
            add("PMU_VI", rd.value, var, ((vi, 1.0),), src)
        elif rd.kind in ("I_R_inj", "I_I_inj"):
            rr, ri = injection_rows(models, incidence, rd.bus)
            row = rr if rd.kind == "I_R_inj" else ri
            add("PMU_IR_inj" if rd.kind == "I_R_inj" else "PMU_II_inj",
                rd.value, var, row, src)
        else:   # I_R_flow / I_I_flow
            pos, side = _locate(models, rd, lookup)
            rr, ri = models[pos].total_rows(side)
            row = rr if rd.kind == "I_R_flow" else ri
            add("PMU_IR_flow" if rd.kind == "I_R_flow" else "PMU_II_flow",
                rd.value, var, row, src)

    for key in order:
        entry = pairs[key]
        if "P" not in entry or "Q" not in entry:
            present = next(iter(entry.values()))
            raise MeasurementError(
                f"reading {present.id}: RTU active/reactive readings must come in "
                "P/Q pairs for the same element")
        p_rd, q_rd = entry["P"], entry["Q"]
        v_rd = rtu_v[p_rd.bus]
        vm = v_rd.value
        p_over = p_rd.value / (vm * vm)
        q_over = q_rd.value / (vm * vm)
        var_r = pseudo_variance(vm, v_rd.sigma, p_rd.value, p_rd.sigma)
        var_i = pseudo_variance(vm, v_rd.sigma, q_rd.value, q_rd.sigma)
        if key[0] == "inj":
            net_r, net_i = injection_rows(models, incidence, p_rd.bus)
            kind_r, kind_i = "RTU_PSEUDO_R_inj", "RTU_PSEUDO_I_inj"
        else:
            _, pos, side = key
            net_r, net_i = models[pos].total_rows(side)
            kind_r, kind_i = "RTU_PSEUDO_R_flow", "RTU_PSEUDO_I_flow"
        vr, vi = index.vr(p_rd.bus), index.vi(p_rd.bus)
        dev_r = [(vr, p_over)] + ([(vi, q_over)] if vi is not None else [])
        dev_i = [(vr, -q_over)] + ([(vi, p_over)] if vi is not None else [])
        src = (v_rd.id, p_rd.id, q_rd.id)
        add(kind_r, 0.0, var_r, _merge(net_r, dev_r), src)
        add(kind_i, 0.0, var_i, _merge(net_i, dev_i), src)

    return MeasurementModel(rows=tuple(rows), state_dim=index.dim,
                            reference_bus=case.reference_bus, index=index)


def _merge(row: Row, extra: list[tuple[int, float]]) -> Row:
    acc = {i: c for i, c in row}
    for i, c in extra:
        acc[i] = acc.get(i, 0.0) + c
    return tuple(sorted((i, c) for i, c in acc.items() if c != 0.0))


def predict_readings(readings: list[RawReading],
                     models: list[ComponentCurrentModel],
                     incidence: IncidenceIndex,
                     v: dict[int, complex]) -> np.ndarray:
    """Evaluate every reading's exact measurement value at complex voltages v.

    At the true profile this yields the truth vector z_t; at estimated voltages
    it yields z_hat.  RTU powers follow the received-at-bus sign convention.
    """
    out = np.empty(len(readings))
    lookup = branch_lookup(models)
    inj_cache: dict[int, complex] = {}
    for n, rd in enumerate(readings):
        if rd.kind in ("V_R", "V_I"):
            vc = v[rd.bus]
            out[n] = vc.real if rd.kind == "V_R" else vc.imag
        elif rd.kind == "V_mag":
            out[n] = abs(v[rd.bus])
        elif rd.kind in ("I_R_inj", "I_I_inj", "P_inj", "Q_inj"):
            if rd.bus not in inj_cache:
                inj_cache[rd.bus] = injected_current_complex(models, incidence, rd.bus, v)
            inet = inj_cache[rd.bus]
            if rd.kind == "I_R_inj":
                out[n] = inet.real
            elif rd.kind == "I_I_inj":
                out[n] = inet.imag
            else:
                s = v[rd.bus] * (-inet).conjugate()
                out[n] = s.real if rd.kind == "P_inj" else s.imag
        else:
            pos, side = _locate(models, rd, lookup)
            cur = models[pos].total_complex(side, v)
            if rd.kind == "I_R_flow":
                out[n] = cur.real
            elif rd.kind == "I_I_flow":
                out[n] = cur.imag
            else:
                s = v[rd.bus] * (-cur).conjugate()
                out[n] = s.real if rd.kind == "P_flow" else s.imag
    return out


def readings_to_json(readings: list[RawReading]) -> list[dict]:
    out = []
    for rd in readings:
        doc = {"id": rd.id, "device": rd.device, "kind": rd.kind, "bus": rd.bus,
               "value": rd.value, "sigma": rd.sigma}
        if rd.is_flow:
            doc["branch_from"] = rd.branch_from
            doc["branch_to"] = rd.branch_to
            if rd.ckt:
                doc["ckt"] = rd.ckt
        out.append(doc)
    return out


def readings_from_json(docs: list[dict]) -> list[RawReading]:
    readings = []
    for n, doc in enumerate(docs):
        try:
            readings.append(RawReading(
                id=str(doc.get("id", f"r{n:05d}")),
                device=doc["device"], kind=doc["kind"], bus=int(doc["bus"]),
                value=float(doc["value"]), sigma=float(doc["sigma"]),
                branch_from=(int(doc["branch_from"]) if "branch_from" in doc
                             and doc["branch_from"] is not None else None),
                branch_to=(int(doc["branch_to"]) if "branch_to" in doc
                           and doc["branch_to"] is not None else None),
                ckt=int(doc.get("ckt", 0))))
        except KeyError as exc:
            raise MeasurementError(f"reading entry {n}: missing field {exc}") from exc
    return readings
