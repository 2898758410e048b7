"""Linear WLS solve plus largest-normalized-residual bad data processing.

The gain matrix G = H^T R^-1 H is factorized once with a sparse LU
(fill-reducing column ordering).  In correction mode only the measurement
vector changes between detection iterations, so the same factorization and the
same residual-covariance diagonal are reused throughout the loop.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from scipy.sparse import diags
from scipy.sparse.linalg import splu

from .measurements import MeasurementModel

CRITICALITY_FLOOR = 1e-10   # omega_ii < floor * R_ii marks a critical row
OMEGA_CHUNK = 512


class EstimationError(Exception):
    pass


class UnobservableError(EstimationError):
    """Gain matrix is (numerically) singular: the set does not determine the state."""

    def __init__(self, message, pivot_index=None):
        super().__init__(message)
        self.pivot_index = pivot_index


class AllCriticalError(EstimationError):
    """No row has a usable residual variance; bad data detection is impossible."""


@dataclass(frozen=True)
class StateVector:
    v_r: np.ndarray            # length N, bus order
    v_i: np.ndarray            # length N-1, non-reference buses in bus order
    bus_ids: tuple[int, ...]
    reference_bus: int

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.v_r, self.v_i])

    def complex_voltages(self) -> dict[int, complex]:
        out = {}
        k = 0
        for i, b in enumerate(self.bus_ids):
            if b == self.reference_bus:
                out[b] = complex(self.v_r[i], 0.0)
            else:
                out[b] = complex(self.v_r[i], self.v_i[k])
                k += 1
        return out


def _state_from_vector(model: MeasurementModel, x: np.ndarray) -> StateVector:
    n = model.index.n_buses
    return StateVector(v_r=x[:n].copy(), v_i=x[n:].copy(),
                       bus_ids=model.index.bus_ids,
                       reference_bus=model.reference_bus)


@dataclass(frozen=True)
class BadDataEvent:
    iteration: int
    row_id: int
    r_norm: float
    original_z: float
    corrected_z: float | None     # None when the row was removed instead
    sources: tuple[str, ...]

    @property
    def removed(self) -> bool:
        return self.corrected_z is None


@dataclass(frozen=True)
class EstimationReport:
    state: StateVector
    residuals: np.ndarray
    normalized_residuals: np.ndarray     # NaN at critical / removed rows
    events: tuple[BadDataEvent, ...]
    iterations: int
    converged: bool
    solve_time: float
    detect_time: float


def _singular_pivot(G) -> int | None:
    """Best-effort zero-pivot location for an exactly singular gain matrix,
    found by factorizing a lightly damped copy."""
    try:
        d = np.abs(G.diagonal())
        damp = 1e-10 * (d.max() if d.size and d.max() > 0 else 1.0)
        lu = splu((G + diags(np.full(G.shape[0], damp))).tocsc())
        du = np.abs(lu.U.diagonal())
        return int(lu.perm_c[int(np.argmin(du))])
    except Exception:
        return None


class Factorization:
    """Holds H, R and the LU factors of G for repeated solves on new z."""

    def __init__(self, model: MeasurementModel, active: np.ndarray | None = None):
        H, z, r = model.matrices()
        self.model = model
        self.active = np.ones(model.m, dtype=bool) if active is None else active
        self.H = H[self.active]
        self.r = r[self.active]
        self.z0 = z[self.active]
        if not (np.isfinite(self.H.data).all() and np.isfinite(self.z0).all()
                and np.isfinite(self.r).all()):
            raise EstimationError("non-finite entries in the measurement model")
        w = 1.0 / self.r
        self.Hw = (diags(w) @ self.H).tocsr()       # R^-1 H
        G = (self.H.T @ self.Hw).tocsc()
        try:
            self.lu = splu(G)
        except RuntimeError as exc:
            raise UnobservableError(f"singular gain matrix: {exc}",
                                    pivot_index=_singular_pivot(G)) from exc
        du = np.abs(self.lu.U.diagonal())
        bad = np.flatnonzero(du < 1e-12 * du.max())
        if bad.size:
            pivot = int(self.lu.perm_c[bad[0]])
            raise UnobservableError(
                f"rank-deficient gain matrix (zero pivot at state index {pivot})",
                pivot_index=pivot)

    def solve(self, z: np.ndarray) -> np.ndarray:
        rhs = self.Hw.T @ z
        x = self.lu.solve(rhs)
        # One step of iterative refinement keeps the normal-equation residual
        # near machine precision even for wide R spreads.
        gx = self.H.T @ (self.Hw @ x)
        x += self.lu.solve(rhs - gx)
        return x

    def omega_diag(self) -> np.ndarray:
        """Diagonal of Omega = R - H G^-1 H^T."""
        m, dim = self.H.shape
        if m > dim and dim <= 8192:
            # Fewer right-hand sides: invert G once, then take row-wise
            # quadratic forms h_i G^-1 h_i^T against the sparse H.
            ginv = np.empty((dim, dim))
            for start in range(0, dim, OMEGA_CHUNK):
                stop = min(start + OMEGA_CHUNK, dim)
                rhs = np.zeros((dim, stop - start))
                rhs[np.arange(start, stop), np.arange(stop - start)] = 1.0
                ginv[:, start:stop] = self.lu.solve(rhs)
            omega = np.empty(m)
            for start in range(0, m, 4 * OMEGA_CHUNK):
                stop = min(start + 4 * OMEGA_CHUNK, m)
                Hc = self.H[start:stop]
                omega[start:stop] = self.r[start:stop] - \
                    np.asarray(Hc.multiply(Hc @ ginv).sum(axis=1)).ravel()
            return np.maximum(omega, 0.0)
        omega = np.empty(m)
        for start in range(0, m, OMEGA_CHUNK):
            stop = min(start + OMEGA_CHUNK, m)
            B = self.H[start:stop].toarray().T          # dim x chunk
            S = self.lu.solve(B)
            omega[start:stop] = self.r[start:stop] - np.einsum("ji,ji->i", B, S)
        return np.maximum(omega, 0.0)


def solve_wls(model: MeasurementModel) -> StateVector:
    """Direct linear WLS estimate x = (H^T R^-1 H)^-1 H^T R^-1 z."""
    fac = Factorization(model)
    return _state_from_vector(model, fac.solve(fac.z0))


def residual_covariance_diag(model: MeasurementModel) -> np.ndarray:
    return Factorization(model).omega_diag()


def _lnr(z, H, x, r, omega, q):
    """One detection pass; returns (row-local index, residuals, r_norm array)."""
    resid = z - H @ x
    noncritical = omega >= CRITICALITY_FLOOR * r
    if not noncritical.any():
        raise AllCriticalError("every row is critical; bad data cannot be detected")
    r_norm = np.full(z.shape, np.nan)
    r_norm[noncritical] = np.abs(resid[noncritical]) / np.sqrt(omega[noncritical])
    best = int(np.nanargmax(r_norm))
    if r_norm[best] > q:
        return best, resid, r_norm
    return None, resid, r_norm


def lnr_step(model: MeasurementModel, state: StateVector,
             q: float = 3.0) -> BadDataEvent | None:
    """Single detect step at the given state; returns the would-be event."""
    fac = Factorization(model)
    omega = fac.omega_diag()
    best, resid, r_norm = _lnr(fac.z0, fac.H, state.as_vector(), fac.r, omega, q)
    if best is None:
        return None
    corrected = fac.z0[best] - (fac.r[best] / omega[best]) * resid[best]
    return BadDataEvent(iteration=0, row_id=best, r_norm=float(r_norm[best]),
                        original_z=float(fac.z0[best]), corrected_z=float(corrected),
                        sources=model.rows[best].sources)


def run(model: MeasurementModel, q: float = 3.0, mode: str = "correct",
        max_iterations: int = 50) -> EstimationReport:
    """Full estimation: iterate solve -> LNR detect -> correct (or remove)
    until the measurement set is clean."""
    if mode not in ("correct", "remove"):
        raise ValueError(f"unknown mode {mode!r}")
    solve_time = 0.0
    detect_time = 0.0

    active = np.ones(model.m, dtype=bool)
    t0 = time.perf_counter()
    fac = Factorization(model, active)
    z = fac.z0.copy()
    solve_time += time.perf_counter() - t0

    t0 = time.perf_counter()
    omega = fac.omega_diag()
    detect_time += time.perf_counter() - t0

    events: list[BadDataEvent] = []
    converged = False
    iterations = 0
    resid = np.zeros_like(z)
    r_norm = np.full_like(z, np.nan)
    x = np.zeros(model.state_dim)

    for iterations in range(1, max_iterations + 1):
        t0 = time.perf_counter()
        x = fac.solve(z)
        solve_time += time.perf_counter() - t0

        t0 = time.perf_counter()
        best, resid, r_norm = _lnr(z, fac.H, x, fac.r, omega, q)
        detect_time += time.perf_counter() - t0
        if best is None:
            converged = True
            break

        row_global = int(np.flatnonzero(active)[best])
        if mode == "correct":
            corrected = z[best] - (fac.r[best] / omega[best]) * resid[best]
            events.append(BadDataEvent(
                iteration=iterations, row_id=row_global, r_norm=float(r_norm[best]),
                original_z=float(z[best]), corrected_z=float(corrected),
                sources=model.rows[row_global].sources))
            z[best] = corrected
        else:
            events.append(BadDataEvent(
                iteration=iterations, row_id=row_global, r_norm=float(r_norm[best]),
                original_z=float(z[best]), corrected_z=None,
                sources=model.rows[row_global].sources))
            active[row_global] = False
            t0 = time.perf_counter()
            fac = Factorization(model, active)
            z = np.delete(z, best)
            solve_time += time.perf_counter() - t0
            t0 = time.perf_counter()
            omega = fac.omega_diag()
            detect_time += time.perf_counter() - t0

    # Scatter residuals back to full row numbering (NaN on removed rows).
    full_resid = np.full(model.m, np.nan)
    full_rnorm = np.full(model.m, np.nan)
    full_resid[active] = resid
    full_rnorm[active] = r_norm
    return EstimationReport(
        state=_state_from_vector(model, x),
        residuals=full_resid, normalized_residuals=full_rnorm,
        events=tuple(events), iterations=iterations, converged=converged,
        solve_time=solve_time, detect_time=detect_time)


def report_to_json(report: EstimationReport) -> dict:
    return {
        "converged": report.converged,
        "iterations": report.iterations,
        "solve_time_s": report.solve_time,
        "detect_time_s": report.detect_time,
        "state": {
            "bus_ids": list(report.state.bus_ids),
            "reference_bus": report.state.reference_bus,
            "v_r": report.state.v_r.tolist(),
            "v_i": report.state.v_i.tolist(),
        },
        "residuals": [None if np.isnan(v) else v for v in report.residuals],
        "normalized_residuals": [None if np.isnan(v) else v
                                 for v in report.normalized_residuals],
        "events": [
            {"iteration": e.iteration, "row_id": e.row_id, "r_norm": e.r_norm,
             "original_z": e.original_z, "corrected_z": e.corrected_z,
             "removed": e.removed, "sources": list(e.sources)}
            for e in report.events],
    }
