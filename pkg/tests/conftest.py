"""Shared fixtures and independent oracles for the test suite.

The oracles here deliberately avoid the package's sparse row machinery: the
admittance matrix is assembled densely from raw branch data, and measurement
functions are evaluated with complex arithmetic so finite differences and
direct comparisons exercise an independent code path.
"""

import cmath
import math

import numpy as np
import pytest

from rectse import bundled_case_path
from rectse.cases import NetworkCase, load_case, rotate_to_reference


@pytest.fixture(scope="session")
def case14() -> NetworkCase:
    return rotate_to_reference(load_case(bundled_case_path("ieee14")))


@pytest.fixture(scope="session")
def case57() -> NetworkCase:
    return rotate_to_reference(load_case(bundled_case_path("ieee57")))


@pytest.fixture(scope="session")
def case118() -> NetworkCase:
    return rotate_to_reference(load_case(bundled_case_path("ieee118")))


def dense_ybus(case: NetworkCase) -> tuple[np.ndarray, dict[int, int]]:
    """Dense complex bus admittance matrix, assembled from raw branch data."""
    pos = {b.id: i for i, b in enumerate(case.buses)}
    n = len(pos)
    y_bus = np.zeros((n, n), dtype=complex)
    for br in case.branches:
        if not br.status:
            continue
        y = 1.0 / complex(br.r, br.x)
        t = br.tap * cmath.exp(1j * br.shift)
        f, to = pos[br.from_bus], pos[br.to_bus]
        y_bus[f, f] += (y + 0.5j * br.b_charging) / (br.tap * br.tap)
        y_bus[to, to] += y + 0.5j * br.b_charging
        y_bus[f, to] += -y / t.conjugate()
        y_bus[to, f] += -y / t
    for b in case.buses:
        y_bus[pos[b.id], pos[b.id]] += complex(b.shunt_g, b.shunt_b)
    return y_bus, pos


def truth_voltages(case: NetworkCase) -> dict[int, complex]:
    return {b.id: cmath.rect(b.v_true_mag, b.v_true_ang) for b in case.buses}


def branch_side_current(br, v_from: complex, v_to: complex, side: str) -> complex:
    """Current leaving the side bus of a branch, from raw branch data."""
    y = 1.0 / complex(br.r, br.x)
    t = br.tap * cmath.exp(1j * br.shift)
    if side == "from":
        return ((y + 0.5j * br.b_charging) / (br.tap * br.tap)) * v_from \
            - (y / t.conjugate()) * v_to
    return -(y / t) * v_from + (y + 0.5j * br.b_charging) * v_to


def polar_injection_power(case: NetworkCase, bus_id: int) -> tuple[float, float]:
    """Received (P, Q) at a bus via the classic polar power flow equations."""
    y_bus, pos = dense_ybus(case)
    g, b = y_bus.real, y_bus.imag
    k = pos[bus_id]
    vm = np.array([bus.v_true_mag for bus in case.buses])
    va = np.array([bus.v_true_ang for bus in case.buses])
    p_out = sum(vm[k] * vm[m] * (g[k, m] * math.cos(va[k] - va[m])
                                 + b[k, m] * math.sin(va[k] - va[m]))
                for m in range(len(vm)))
    q_out = sum(vm[k] * vm[m] * (g[k, m] * math.sin(va[k] - va[m])
                                 - b[k, m] * math.cos(va[k] - va[m]))
                for m in range(len(vm)))
    return -p_out, -q_out
