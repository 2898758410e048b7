"""Rectangular-coordinate current models for network components.

Every component (line, transformer, bus shunt) is reduced to constant-coefficient
linear maps from the stacked state [V_R for all buses; V_I for non-reference
buses] to its series and shunt currents.  The reference bus imaginary voltage is
fixed at zero and carries no state column, so these maps are only valid for a
case rotated into the reference frame (see cases.rotate_to_reference).
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass

import numpy as np

from .cases import CaseError, NetworkCase

Row = tuple[tuple[int, float], ...]


class ModelError(Exception):
    """Raised for network data the current models cannot represent."""


@dataclass(frozen=True)
class StateIndex:
    """Mapping between bus ids and state-vector positions (dim 2N-1)."""

    bus_ids: tuple[int, ...]
    reference_bus: int

    @property
    def n_buses(self) -> int:
        return len(self.bus_ids)

    @property
    def dim(self) -> int:
        return 2 * self.n_buses - 1

    def vr(self, bus_id: int) -> int:
        return self._pos[bus_id]

    def vi(self, bus_id: int) -> int | None:
        """State position of the imaginary voltage; None for the reference bus."""
        if bus_id == self.reference_bus:
            return None
        return self.n_buses + self._vi_offset[bus_id]

    def __post_init__(self):
        pos = {b: i for i, b in enumerate(self.bus_ids)}
        vi_offset = {}
        k = 0
        for b in self.bus_ids:
            if b != self.reference_bus:
                vi_offset[b] = k
                k += 1
        object.__setattr__(self, "_pos", pos)
        object.__setattr__(self, "_vi_offset", vi_offset)

    def complex_voltages(self, x: np.ndarray) -> dict[int, complex]:
        v = {}
        for b in self.bus_ids:
            vi = self.vi(b)
            v[b] = complex(x[self.vr(b)], 0.0 if vi is None else x[vi])
        return v

    def state_from_case(self, case: NetworkCase) -> np.ndarray:
        """Truth state vector; requires the case to be reference-rotated."""
        x = np.zeros(self.dim)
        for bus in case.buses:
            vc = cmath.rect(bus.v_true_mag, bus.v_true_ang)
            x[self.vr(bus.id)] = vc.real
            vi = self.vi(bus.id)
            if vi is not None:
                x[vi] = vc.imag
        return x


def _rows_from_complex(index: StateIndex, coeffs: dict[int, complex]) -> tuple[Row, Row]:
    """Expand I = sum_k c_k * V_k into real/imaginary coefficient rows."""
    real: dict[int, float] = {}
    imag: dict[int, float] = {}
    for bus_id, c in coeffs.items():
        ir = index.vr(bus_id)
        real[ir] = real.get(ir, 0.0) + c.real
        imag[ir] = imag.get(ir, 0.0) + c.imag
        ii = index.vi(bus_id)
        if ii is not None:
            real[ii] = real.get(ii, 0.0) - c.imag
            imag[ii] = imag.get(ii, 0.0) + c.real
    as_row = lambda d: tuple(sorted((i, v) for i, v in d.items() if v != 0.0))
    return as_row(real), as_row(imag)


@dataclass(frozen=True)
class ComponentCurrentModel:
    """Linear maps from the state to a component's currents, per side.

    For a branch, side "from"/"to" each carry a series current (through the
    series impedance, leaving that side's bus) and a shunt current (the local
    half of line charging).  Bus shunts only have a "from" shunt current.
    Complex per-bus coefficients are kept alongside the expanded state rows so
    values can also be evaluated from full complex voltages.
    """

    comp_id: str
    kind: str                      # "branch" or "shunt"
    from_bus: int
    to_bus: int | None
    ser_coeffs: dict[str, dict[int, complex]]   # side -> {bus: coeff}
    sh_coeffs: dict[str, dict[int, complex]]
    ser_rows: dict[str, tuple[Row, Row]]        # side -> (real row, imag row)
    sh_rows: dict[str, tuple[Row, Row]]

    def sides(self):
        return ("from", "to") if self.kind == "branch" else ("from",)

    def bus_of(self, side: str) -> int:
        return self.from_bus if side == "from" else self.to_bus  # type: ignore[return-value]

    def total_rows(self, side: str) -> tuple[Row, Row]:
        """Series + shunt current rows leaving the side bus."""
        rr = _merge_rows(self.ser_rows[side][0], self.sh_rows[side][0])
        ri = _merge_rows(self.ser_rows[side][1], self.sh_rows[side][1])
        return rr, ri

    def total_complex(self, side: str, v: dict[int, complex]) -> complex:
        out = 0.0 + 0.0j
        for coeffs in (self.ser_coeffs[side], self.sh_coeffs[side]):
            for bus_id, c in coeffs.items():
                out += c * v[bus_id]
        return out


def _merge_rows(*rows: Row) -> Row:
    acc: dict[int, float] = {}
    for row in rows:
        for i, c in row:
            acc[i] = acc.get(i, 0.0) + c
    return tuple(sorted((i, c) for i, c in acc.items() if c != 0.0))


@dataclass(frozen=True)
class IncidenceIndex:
    """Per bus: (component position, side) pairs for all incident components."""

    by_bus: dict[int, tuple[tuple[int, str], ...]]

    def incident(self, bus_id: int) -> tuple[tuple[int, str], ...]:
        try:
            return self.by_bus[bus_id]
        except KeyError:
            raise ModelError(f"unknown bus {bus_id}") from None


def build_models(case: NetworkCase) -> tuple[list[ComponentCurrentModel], IncidenceIndex]:
    """Build constant current models and the bus incidence index.

    A branch with series admittance y, tap t and phase shift phi (both applied
    at the from side) has the two-port admittance blocks
    [y/t^2, -y/(t e^{-j phi}); -y/(t e^{j phi}), y]; the line charging halves
    are placed locally, scaled by 1/t^2 on the from side.
    """
    index = StateIndex(bus_ids=tuple(b.id for b in case.buses),
                       reference_bus=case.reference_bus)
    models: list[ComponentCurrentModel] = []
    incident: dict[int, list[tuple[int, str]]] = {b.id: [] for b in case.buses}

    for n, br in enumerate(case.branches):
        if not br.status:
            continue
        if br.r * br.r + br.x * br.x <= 0.0:
            raise ModelError(f"branch {br.from_bus}-{br.to_bus}: zero series impedance")
        y = 1.0 / complex(br.r, br.x)
        t = br.tap * cmath.exp(1j * br.shift)
        ser = {
            "from": {br.from_bus: y / (br.tap * br.tap), br.to_bus: -y / t.conjugate()},
            "to": {br.from_bus: -y / t, br.to_bus: y},
        }
        sh = {
            "from": {br.from_bus: 0.5j * br.b_charging / (br.tap * br.tap)},
            "to": {br.to_bus: 0.5j * br.b_charging},
        }
        model = ComponentCurrentModel(
            comp_id=f"branch{n}:{br.from_bus}-{br.to_bus}", kind="branch",
            from_bus=br.from_bus, to_bus=br.to_bus,
            ser_coeffs=ser, sh_coeffs=sh,
            ser_rows={s: _rows_from_complex(index, ser[s]) for s in ("from", "to")},
            sh_rows={s: _rows_from_complex(index, sh[s]) for s in ("from", "to")})
        pos = len(models)
        models.append(model)
        incident[br.from_bus].append((pos, "from"))
        incident[br.to_bus].append((pos, "to"))

    for bus in case.buses:
        if bus.shunt_g == 0.0 and bus.shunt_b == 0.0:
            continue
        coeffs = {bus.id: complex(bus.shunt_g, bus.shunt_b)}
        empty: Row = ()
        model = ComponentCurrentModel(
            comp_id=f"shunt:{bus.id}", kind="shunt", from_bus=bus.id, to_bus=None,
            ser_coeffs={"from": {}}, sh_coeffs={"from": coeffs},
            ser_rows={"from": (empty, empty)},
            sh_rows={"from": _rows_from_complex(index, coeffs)})
        pos = len(models)
        models.append(model)
        incident[bus.id].append((pos, "from"))

    inc = IncidenceIndex(by_bus={b: tuple(v) for b, v in incident.items()})
    return models, inc


def state_index(case: NetworkCase) -> StateIndex:
    return StateIndex(bus_ids=tuple(b.id for b in case.buses),
                      reference_bus=case.reference_bus)


def eval_row(row: Row, x: np.ndarray) -> float:
    return float(sum(c * x[i] for i, c in row))


def injection_rows(models: list[ComponentCurrentModel], incidence: IncidenceIndex,
                   bus_id: int) -> tuple[Row, Row]:
    """KCL rows for the net current leaving a bus through all incident components."""
    rr, ri = [], []
    for pos, side in incidence.incident(bus_id):
        tr, ti = models[pos].total_rows(side)
        rr.append(tr)
        ri.append(ti)
    return _merge_rows(*rr), _merge_rows(*ri)


def injected_current(models: list[ComponentCurrentModel], incidence: IncidenceIndex,
                     bus_id: int, x: np.ndarray) -> tuple[float, float]:
    """Net (I_R, I_I) flowing out of the bus into the network at state x."""
    rr, ri = injection_rows(models, incidence, bus_id)
    return eval_row(rr, x), eval_row(ri, x)


def injected_current_complex(models, incidence, bus_id, v: dict[int, complex]) -> complex:
    out = 0.0 + 0.0j
    for pos, side in incidence.incident(bus_id):
        out += models[pos].total_complex(side, v)
    return out


@dataclass(frozen=True)
class TruthTables:
    """True values for every supported measurement kind at the case's profile.

    Sign convention for powers: positive means power received at the metering
    bus (consumed there).  A net load bus therefore has positive p_inj; the
    sending end of a loaded line sees negative p_flow.  This is the convention
    the KCL pseudo-measurement rows expect for raw RTU values.
    """

    v_complex: dict[int, complex]
    v_mag: dict[int, float]
    i_inj: dict[int, complex]                       # net current out of the bus
    p_inj: dict[int, float]
    q_inj: dict[int, float]
    i_flow: dict[tuple[int, str], complex]          # (component pos, side) -> current
    p_flow: dict[tuple[int, str], float]
    q_flow: dict[tuple[int, str], float]


def true_measurement_values(case: NetworkCase,
                            models: list[ComponentCurrentModel],
                            incidence: IncidenceIndex) -> TruthTables:
    """Evaluate all measurement truths from the case's stored voltage profile."""
    v = {b.id: cmath.rect(b.v_true_mag, b.v_true_ang) for b in case.buses}
    v_mag = {b.id: b.v_true_mag for b in case.buses}
    i_inj, p_inj, q_inj = {}, {}, {}
    for b in case.buses:
        inet = injected_current_complex(models, incidence, b.id, v)
        s_recv = v[b.id] * (-inet).conjugate()
        i_inj[b.id] = inet
        p_inj[b.id] = s_recv.real
        q_inj[b.id] = s_recv.imag
    i_flow, p_flow, q_flow = {}, {}, {}
    for pos, model in enumerate(models):
        if model.kind != "branch":
            continue
        for side in model.sides():
            cur = model.total_complex(side, v)
            s_recv = v[model.bus_of(side)] * (-cur).conjugate()
            i_flow[pos, side] = cur
            p_flow[pos, side] = s_recv.real
            q_flow[pos, side] = s_recv.imag
    return TruthTables(v_complex=v, v_mag=v_mag, i_inj=i_inj, p_inj=p_inj,
                       q_inj=q_inj, i_flow=i_flow, p_flow=p_flow, q_flow=q_flow)


def branch_lookup(models: list[ComponentCurrentModel]) -> dict[tuple[int, int], list[int]]:
    """(low bus, high bus) -> positions of parallel branches, in model order."""
    table: dict[tuple[int, int], list[int]] = {}
    for pos, m in enumerate(models):
        if m.kind == "branch":
            key = (min(m.from_bus, m.to_bus), max(m.from_bus, m.to_bus))
            table.setdefault(key, []).append(pos)
    return table


def branch_position(models: list[ComponentCurrentModel], from_bus: int, to_bus: int,
                    side_bus: int, ckt: int = 0,
                    lookup: dict[tuple[int, int], list[int]] | None = None
                    ) -> tuple[int, str]:
    """Locate a branch component (either endpoint order) and the side metered
    at side_bus; ckt disambiguates parallel branches.  Pass a prebuilt lookup
    when resolving many readings."""
    if lookup is None:
        lookup = branch_lookup(models)
    matches = lookup.get((min(from_bus, to_bus), max(from_bus, to_bus)), [])
    if not matches or ckt >= len(matches):
        raise ModelError(f"no in-service branch {from_bus}-{to_bus} (ckt {ckt})")
    pos = matches[ckt]
    model = models[pos]
    if side_bus == model.from_bus:
        return pos, "from"
    if side_bus == model.to_bus:
        return pos, "to"
    raise ModelError(f"bus {side_bus} is not an endpoint of branch {from_bus}-{to_bus}")
