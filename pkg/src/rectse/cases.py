"""Network case parsing, validation and per-unit normalization.

Two on-disk formats are accepted: a canonical JSON schema (normative) and a
subset of the MATPOWER .m case syntax.  Angles are degrees on disk and radians
in memory.  The voltage profile stored in the case is treated as the ground
truth operating point; no power flow is solved here.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, replace


class CaseError(Exception):
    """Raised for malformed or inconsistent case input."""


@dataclass(frozen=True)
class Bus:
    id: int
    v_true_mag: float   # per-unit
    v_true_ang: float   # radians
    shunt_g: float = 0.0  # per-unit conductance on system base
    shunt_b: float = 0.0  # per-unit susceptance on system base


@dataclass(frozen=True)
class Branch:
    from_bus: int
    to_bus: int
    r: float
    x: float
    b_charging: float = 0.0   # total line charging, per-unit
    tap: float = 1.0          # off-nominal ratio at the from side
    shift: float = 0.0        # radians
    status: bool = True


@dataclass(frozen=True)
class NetworkCase:
    base_mva: float
    reference_bus: int
    buses: tuple[Bus, ...]
    branches: tuple[Branch, ...]

    @property
    def n_buses(self) -> int:
        return len(self.buses)

    def bus_index(self) -> dict[int, int]:
        return {bus.id: i for i, bus in enumerate(self.buses)}

    def bus(self, bus_id: int) -> Bus:
        for b in self.buses:
            if b.id == bus_id:
                return b
        raise CaseError(f"unknown bus {bus_id}")


def _validate(case: NetworkCase) -> NetworkCase:
    if not case.buses:
        raise CaseError("case has no buses")
    ids = [b.id for b in case.buses]
    if len(set(ids)) != len(ids):
        dup = sorted(i for i in set(ids) if ids.count(i) > 1)
        raise CaseError(f"duplicate bus ids: {dup}")
    if case.reference_bus not in set(ids):
        raise CaseError(f"reference bus {case.reference_bus} does not exist")
    for bus in case.buses:
        if not bus.v_true_mag > 0:
            raise CaseError(f"bus {bus.id}: missing or nonpositive voltage magnitude")
    known = set(ids)
    for br in case.branches:
        for end in (br.from_bus, br.to_bus):
            if end not in known:
                raise CaseError(
                    f"branch {br.from_bus}-{br.to_bus}: dangling endpoint {end}")
        if not br.tap > 0:
            raise CaseError(f"branch {br.from_bus}-{br.to_bus}: nonpositive tap {br.tap}")
        if br.status and br.r * br.r + br.x * br.x <= 0.0:
            raise CaseError(f"branch {br.from_bus}-{br.to_bus}: zero series impedance")
    return case


def parse_case(text: str) -> NetworkCase:
    """Parse JSON or MATPOWER .m case text into a validated per-unit case.

    Out-of-service branches are dropped.  The bus voltage columns are kept as
    the truth profile.
    """
    stripped = text.lstrip()
    if stripped.startswith("{"):
        case = _parse_json(text)
    else:
        case = _parse_matpower(text)
    case = replace(case, branches=tuple(br for br in case.branches if br.status))
    return _validate(case)


def _parse_json(text: str) -> NetworkCase:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CaseError(f"JSON syntax error at line {exc.lineno}, column {exc.colno}: "
                        f"{exc.msg}") from exc
    try:
        buses = tuple(
            Bus(id=int(b["id"]),
                v_true_mag=float(b["vm"]),
                v_true_ang=math.radians(float(b["va_deg"])),
                shunt_g=float(b.get("gs", 0.0)),
                shunt_b=float(b.get("bs", 0.0)))
            for b in doc["buses"])
        branches = tuple(
            Branch(from_bus=int(br["from"]),
                   to_bus=int(br["to"]),
                   r=float(br["r"]),
                   x=float(br["x"]),
                   b_charging=float(br.get("b", 0.0)),
                   tap=float(br.get("tap", 1.0)) or 1.0,
                   shift=math.radians(float(br.get("shift_deg", 0.0))),
                   status=bool(br.get("status", 1)))
            for br in doc["branches"])
        return NetworkCase(base_mva=float(doc["base_mva"]),
                           reference_bus=int(doc["reference_bus"]),
                           buses=buses, branches=branches)
    except (KeyError, TypeError, ValueError) as exc:
        raise CaseError(f"malformed case JSON: {exc}") from exc


_MATRIX_RE = re.compile(
    r"mpc\.(?P<name>baseMVA|bus|branch|gen)\s*=\s*(?P<body>\[[^\]]*\]|[^;]+);",
    re.DOTALL)


def _parse_matpower(text: str) -> NetworkCase:
    # Strip % comments line by line so reported line numbers stay meaningful.
    lines = text.splitlines()
    clean = "\n".join(ln.split("%", 1)[0] for ln in lines)
    tables: dict[str, object] = {}
    for m in _MATRIX_RE.finditer(clean):
        name, body = m.group("name"), m.group("body").strip()
        if body.startswith("["):
            rows = []
            body_start_line = clean.count("\n", 0, m.start()) + 1
            for off, row_text in enumerate(body[1:-1].split(";")):
                row_text = row_text.strip()
                if not row_text:
                    continue
                try:
                    rows.append([float(tok) for tok in row_text.replace(",", " ").split()])
                except ValueError as exc:
                    raise CaseError(
                        f"syntax error in mpc.{name} near line {body_start_line + off}: "
                        f"{row_text!r}") from exc
            tables[name] = rows
        else:
            try:
                tables[name] = float(body)
            except ValueError as exc:
                raise CaseError(f"cannot parse mpc.{name} = {body!r}") from exc
    for required in ("baseMVA", "bus", "branch"):
        if required not in tables:
            raise CaseError(f"missing mpc.{required} table")
    base_mva = float(tables["baseMVA"])  # type: ignore[arg-type]

    buses = []
    reference_bus = None
    for row in tables["bus"]:  # type: ignore[union-attr]
        if len(row) < 9:
            raise CaseError(f"bus row too short: {row}")
        bus_id, bus_type = int(row[0]), int(row[1])
        vm, va_deg = float(row[7]), float(row[8])
        if vm <= 0:
            raise CaseError(f"bus {bus_id}: missing voltage profile (Vm={vm})")
        if bus_type == 3:
            reference_bus = bus_id
        buses.append(Bus(id=bus_id, v_true_mag=vm, v_true_ang=math.radians(va_deg),
                         shunt_g=float(row[4]) / base_mva,
                         shunt_b=float(row[5]) / base_mva))
    if reference_bus is None:
        raise CaseError("no reference (type 3) bus in mpc.bus")

    branches = []
    for row in tables["branch"]:  # type: ignore[union-attr]
        if len(row) < 11:
            raise CaseError(f"branch row too short: {row}")
        tap = float(row[8])
        branches.append(Branch(from_bus=int(row[0]), to_bus=int(row[1]),
                               r=float(row[2]), x=float(row[3]),
                               b_charging=float(row[4]),
                               tap=tap if tap != 0.0 else 1.0,
                               shift=math.radians(float(row[9])),
                               status=bool(int(row[10]))))
    return NetworkCase(base_mva=base_mva, reference_bus=reference_bus,
                       buses=tuple(buses), branches=tuple(branches))


def serialize_case(case: NetworkCase) -> str:
    """Serialize to the canonical JSON schema (round-trips with parse_case)."""
    doc = {
        "base_mva": case.base_mva,
        "reference_bus": case.reference_bus,
        "buses": [
            {"id": b.id, "vm": b.v_true_mag, "va_deg": math.degrees(b.v_true_ang),
             "gs": b.shunt_g, "bs": b.shunt_b}
            for b in case.buses],
        "branches": [
            {"from": br.from_bus, "to": br.to_bus, "r": br.r, "x": br.x,
             "b": br.b_charging, "tap": br.tap, "shift_deg": math.degrees(br.shift),
             "status": 1 if br.status else 0}
            for br in case.branches],
    }
    return json.dumps(doc, indent=1)


def rotate_to_reference(case: NetworkCase) -> NetworkCase:
    """Shift all truth angles so the reference bus angle is exactly zero."""
    ref_ang = case.bus(case.reference_bus).v_true_ang
    if ref_ang == 0.0:
        return case
    buses = tuple(replace(b, v_true_ang=b.v_true_ang - ref_ang) for b in case.buses)
    return replace(case, buses=buses)


def load_case(path: str) -> NetworkCase:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_case(fh.read())
