"""Fixed-step implicit Euler for linear constant-coefficient systems.

Solves M*dx/dt + K*x = f(t) with the update
x_{k+1} = (M/h + K)^{-1} (f(t_{k+1}) + (M/h) x_k).  The system matrix is
time-independent, so one dense LU factorization is shared by all steps of
a sweep; a final shortened step (when the interval is not an integer
number of steps) refactorizes once.  Every accepted step costs exactly one
linear solve, which is the unit of the cost accounting used elsewhere.
"""

from __future__ import annotations

import threading
from typing import Callable

import numpy as np
from scipy.linalg import LinAlgError, lu_factor, lu_solve

# Relative slack when deciding whether an interval is an integer number of
# steps; intervals within this tolerance of n*h are stepped uniformly.
_RATIO_TOL = 1e-9

_PIVOT_TOL = 1e-14

# LAPACK factorization routines are not reliably reentrant on every BLAS
# build; all factorizations go through this lock.  Applying a prepared
# solver is pure numpy matmul and needs no serialization.
_FACTOR_LOCK = threading.Lock()


class NonpositiveStepError(ValueError):
    """Step size h must be strictly positive."""


class SingularSystemError(ValueError):
    """(M/h + K) is numerically singular and cannot be factored."""


class LinearSystemSolver:
    """Dense LU factorization of (M/h + K) with partial pivoting.

    The factorization is computed once and applied to all steps of a
    sweep (as the explicitly accumulated inverse, so that stepping is a
    single matrix-vector product and safe under concurrent use).
    Instances are immutable after construction and may be shared by
    concurrent sweeps.
    """

    def __init__(self, M: np.ndarray, K: np.ndarray, h: float):
        if h <= 0.0:
            raise NonpositiveStepError(f"step size must be positive, got {h}")
        M = np.asarray(M, dtype=float)
        K = np.asarray(K, dtype=float)
        if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape != K.shape:
            raise ValueError("M and K must be square matrices of equal size")
        self.h = h
        self.size = M.shape[0]
        self.mass_over_h = M / h
        system = self.mass_over_h + K
        scale = np.max(np.abs(system))
        with _FACTOR_LOCK:
            try:
                lu = lu_factor(system, check_finite=False)
            except LinAlgError as exc:
                raise SingularSystemError(str(exc)) from exc
            pivots = np.abs(np.diag(lu[0]))
            if scale == 0.0 or np.min(pivots) <= _PIVOT_TOL * scale:
                raise SingularSystemError(
                    f"pivot below {_PIVOT_TOL:g} * max|M/h + K|; "
                    "system is numerically singular")
            self._step_matrix = lu_solve(lu, np.eye(self.size),
                                         check_finite=False)

    def advance(self, x: np.ndarray, rhs_next: np.ndarray) -> np.ndarray:
        """One implicit Euler step given f evaluated at the step endpoint."""
        return self._step_matrix @ (rhs_next + self.mass_over_h @ x)


def _step_times(t_start: float, t_end: float, h: float) -> tuple[np.ndarray, bool]:
    """Endpoint times of every step in [t_start, t_end].

    Returns the times and whether the final step is shortened (interval
    not an integer multiple of h).  The last entry is exactly t_end.
    """
    if h <= 0.0:
        raise NonpositiveStepError(f"step size must be positive, got {h}")
    span = t_end - t_start
    if span < 0.0:
        raise ValueError("t_end must not precede t_start")
    if span == 0.0:
        return np.empty(0), False
    ratio = span / h
    n = int(round(ratio))
    if n >= 1 and abs(ratio - n) <= _RATIO_TOL:
        times = t_start + h * np.arange(1, n + 1)
        times[-1] = t_end
        return times, False
    n_full = int(np.floor(ratio))
    times = np.empty(n_full + 1)
    times[:n_full] = t_start + h * np.arange(1, n_full + 1)
    times[-1] = t_end
    return times, True


def implicit_euler_sweep(
    M: np.ndarray,
    K: np.ndarray,
    f: Callable[[float], np.ndarray],
    x_start: np.ndarray,
    t_start: float,
    t_end: float,
    h: float,
    solver: LinearSystemSolver | None = None,
) -> tuple[np.ndarray, int]:
    """Integrate from t_start to t_end; returns (x(t_end), n_solves).

    ``solver`` may carry a prefactored LinearSystemSolver for (M, K, h) to
    share the factorization across sweeps; it is never consulted for a
    shortened final step, which factorizes locally.
    """
    times, shortened = _step_times(t_start, t_end, h)
    x = np.array(x_start, dtype=float)
    if times.size == 0:
        return x, 0
    n_regular = times.size - 1 if shortened else times.size
    if n_regular > 0 and solver is None:
        solver = LinearSystemSolver(M, K, h)
    for t in times[:n_regular]:
        x = solver.advance(x, f(t))
    if shortened:
        h_last = times[-1] - (times[-2] if times.size > 1 else t_start)
        last = LinearSystemSolver(M, K, h_last)
        x = last.advance(x, f(times[-1]))
    return x, times.size


def implicit_euler_trajectory(
    M: np.ndarray,
    K: np.ndarray,
    f: Callable[[float], np.ndarray],
    x_start: np.ndarray,
    t_start: float,
    t_end: float,
    h: float,
    solver: LinearSystemSolver | None = None,
) -> tuple[np.ndarray, np.ndarray, int]:
    """Like implicit_euler_sweep but records every accepted step.

    Returns (times, states, n_solves) where times[0] = t_start and
    states[0] = x_start; states has one row per recorded time.
    """
    step_ends, shortened = _step_times(t_start, t_end, h)
    x = np.array(x_start, dtype=float)
    times = np.concatenate(([t_start], step_ends))
    states = np.empty((times.size, x.size))
    states[0] = x
    if step_ends.size == 0:
        return times, states, 0
    n_regular = step_ends.size - 1 if shortened else step_ends.size
    if n_regular > 0 and solver is None:
        solver = LinearSystemSolver(M, K, h)
    for i, t in enumerate(step_ends[:n_regular]):
        x = solver.advance(x, f(t))
        states[i + 1] = x
    if shortened:
        h_last = step_ends[-1] - (step_ends[-2] if step_ends.size > 1 else t_start)
        last = LinearSystemSolver(M, K, h_last)
        x = last.advance(x, f(step_ends[-1]))
        states[-1] = x
    return times, states, step_ends.size
