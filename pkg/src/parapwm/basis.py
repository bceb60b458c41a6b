"""Orthonormal periodic basis functions for PWM ripple representation.

The basis lives on relative time tau in [0, 1) with a kink ("cusp") at the
duty cycle D.  Functions are piecewise polynomials on [0, D] and [D, 1]:
the first is the constant 1, the second the normalized rising/falling
ramp peaking at D, and each further one is the antiderivative of its
predecessor, orthonormalized against all earlier functions.  All inner
products and the Galerkin coupling matrices are computed exactly from the
polynomial coefficients; no quadrature tolerance enters construction.

Pieces are stored as Legendre series in the per-piece coordinate
xi in [-1, 1].  In that representation the coefficients of well-scaled
functions stay O(1) for any duty cycle and inner products are diagonal
sums, so orthonormality survives in floating point to ~1e-14 where global
monomial coefficients (which grow like duty^-degree) lose six digits or
more to cancellation.
"""

from __future__ import annotations

import numpy as np
from numpy.polynomial import legendre as L
from numpy.polynomial import polynomial as P

_DEGENERATE_NORM = 1e-12


class DegenerateBasisError(ValueError):
    """A candidate function became (numerically) linearly dependent."""


def _power01_to_legendre(coeffs) -> np.ndarray:
    """Power series in u on [0, 1] -> Legendre series in xi = 2u - 1."""
    coeffs = np.atleast_1d(np.asarray(coeffs, dtype=float))
    poly_xi = np.zeros(1)
    u_power = np.array([1.0])           # u^k as power series in xi
    for k, c in enumerate(coeffs):
        if k:
            u_power = P.polymul(u_power, [0.5, 0.5])
        if c != 0.0:
            poly_xi = P.polyadd(poly_xi, c * u_power)
    return L.poly2leg(poly_xi)


def _legendre_to_power01(series: np.ndarray) -> np.ndarray:
    """Legendre series in xi -> power series in u on [0, 1], xi = 2u - 1."""
    poly_xi = L.leg2poly(series)
    out = np.zeros(1)
    xi_power = np.array([1.0])          # xi^k as power series in u
    for k, c in enumerate(poly_xi):
        if k:
            xi_power = P.polymul(xi_power, [-1.0, 2.0])
        if c != 0.0:
            out = P.polyadd(out, c * xi_power)
    return out


class PiecewisePolynomial:
    """Polynomial on [0, duty] and [duty, 1], continuous by construction.

    Constructed from per-piece local power coefficients (ascending, in the
    piece coordinate scaled to [0, 1]); stored internally as per-piece
    Legendre series.  Supports the exact calculus the basis construction
    needs: evaluation, piecewise derivative, continuous antiderivative,
    partial integrals and L2 inner products on [0, 1].
    """

    __slots__ = ("duty", "_low", "_high")

    def __init__(self, duty: float, low, high, _legendre: bool = False):
        if not 0.0 < duty < 1.0:
            raise ValueError("duty must lie in (0, 1)")
        self.duty = duty
        if _legendre:
            self._low = np.atleast_1d(np.asarray(low, dtype=float))
            self._high = np.atleast_1d(np.asarray(high, dtype=float))
        else:
            self._low = _power01_to_legendre(low)
            self._high = _power01_to_legendre(high)
        self._low.setflags(write=False)
        self._high.setflags(write=False)

    @property
    def widths(self) -> tuple[float, float]:
        return self.duty, 1.0 - self.duty

    @property
    def degree(self) -> int:
        return max(self._low.size, self._high.size) - 1

    def power_coefficients(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-piece ascending power coefficients in the [0, 1] coordinate."""
        return (_legendre_to_power01(self._low),
                _legendre_to_power01(self._high))

    def __call__(self, tau):
        tau = np.asarray(tau, dtype=float)
        d, w_high = self.duty, 1.0 - self.duty
        vals = np.where(tau <= d,
                        L.legval(2.0 * tau / d - 1.0, self._low),
                        L.legval(2.0 * (tau - d) / w_high - 1.0, self._high))
        return float(vals) if vals.ndim == 0 else vals

    def left_limit_at_cusp(self) -> float:
        return float(L.legval(1.0, self._low))

    def right_limit_at_cusp(self) -> float:
        return float(L.legval(-1.0, self._high))

    def derivative(self) -> "PiecewisePolynomial":
        """Piecewise derivative (generally discontinuous at the cusp)."""
        w_low, w_high = self.widths
        return PiecewisePolynomial(
            self.duty,
            L.legder(self._low) * (2.0 / w_low),
            L.legder(self._high) * (2.0 / w_high),
            _legendre=True)

    def antiderivative(self) -> "PiecewisePolynomial":
        """Antiderivative F with F(0) = 0, continuous across the cusp."""
        w_low, w_high = self.widths
        F_low = 0.5 * w_low * L.legint(self._low, lbnd=-1.0)
        value_at_cusp = L.legval(1.0, F_low)
        F_high = 0.5 * w_high * L.legint(self._high, lbnd=-1.0)
        F_high = L.legadd(F_high, [value_at_cusp])
        return PiecewisePolynomial(self.duty, F_low, F_high, _legendre=True)

    def integrate(self, a: float = 0.0, b: float = 1.0) -> float:
        """Exact integral over [a, b], 0 <= a <= b <= 1."""
        if not 0.0 <= a <= b <= 1.0:
            raise ValueError("integration bounds must satisfy 0 <= a <= b <= 1")
        d = self.duty
        w_low, w_high = self.widths
        total = 0.0
        hi = min(b, d)
        if hi > a:
            F = L.legint(self._low, lbnd=-1.0)
            total += 0.5 * w_low * (L.legval(2.0 * hi / d - 1.0, F)
                                    - L.legval(2.0 * a / d - 1.0, F))
        lo = max(a, d)
        if b > lo:
            F = L.legint(self._high, lbnd=-1.0)
            total += 0.5 * w_high * (
                L.legval(2.0 * (b - d) / w_high - 1.0, F)
                - L.legval(2.0 * (lo - d) / w_high - 1.0, F))
        return float(total)

    def inner(self, other: "PiecewisePolynomial") -> float:
        """L2 inner product on [0, 1], exact.

        Legendre orthogonality turns each piece into a diagonal sum
        width * sum_k c_k d_k / (2k + 1).
        """
        total = 0.0
        for width, c, d in ((self.duty, self._low, other._low),
                            (1.0 - self.duty, self._high, other._high)):
            n = min(c.size, d.size)
            k = np.arange(n)
            total += width * float(np.sum(c[:n] * d[:n] / (2.0 * k + 1.0)))
        return total

    def __add__(self, other: "PiecewisePolynomial") -> "PiecewisePolynomial":
        return PiecewisePolynomial(self.duty,
                                   L.legadd(self._low, other._low),
                                   L.legadd(self._high, other._high),
                                   _legendre=True)

    def __sub__(self, other: "PiecewisePolynomial") -> "PiecewisePolynomial":
        return PiecewisePolynomial(self.duty,
                                   L.legsub(self._low, other._low),
                                   L.legsub(self._high, other._high),
                                   _legendre=True)

    def __mul__(self, scalar: float) -> "PiecewisePolynomial":
        return PiecewisePolynomial(self.duty, self._low * scalar,
                                   self._high * scalar, _legendre=True)

    __rmul__ = __mul__


def _orthonormalize(candidate: PiecewisePolynomial,
                    accepted: list[PiecewisePolynomial]) -> PiecewisePolynomial:
    """Modified Gram-Schmidt with one reorthogonalization pass."""
    v = candidate
    for _ in range(2):
        for w in accepted:
            v = v - v.inner(w) * w
    norm = np.sqrt(v.inner(v))
    if norm < _DEGENERATE_NORM:
        raise DegenerateBasisError(
            f"candidate norm {norm:.3e} after projection; "
            "functions are linearly dependent")
    return (1.0 / norm) * v


class BasisSet:
    """Orthonormal piecewise-polynomial basis on relative time [0, 1)."""

    __slots__ = ("duty_cycle", "switching_period", "functions")

    def __init__(self, duty_cycle: float, switching_period: float,
                 functions: tuple[PiecewisePolynomial, ...]):
        self.duty_cycle = duty_cycle
        self.switching_period = switching_period
        self.functions = tuple(functions)

    @property
    def size(self) -> int:
        return len(self.functions)

    def evaluate_relative(self, tau: float) -> np.ndarray:
        """Basis vector w(tau) for relative time tau in [0, 1]."""
        return np.array([w(tau) for w in self.functions])

    def evaluate(self, t2: float) -> np.ndarray:
        """Basis vector at absolute fast time: tau = (t2/T_s) mod 1."""
        return self.evaluate_relative((t2 / self.switching_period) % 1.0)

    def gram_matrix(self) -> np.ndarray:
        """Matrix of pairwise L2 inner products (identity up to round-off)."""
        n = self.size
        g = np.empty((n, n))
        for k in range(n):
            for l in range(k, n):
                g[k, l] = g[l, k] = self.functions[k].inner(self.functions[l])
        return g

    def mass_matrix(self) -> np.ndarray:
        """T_s * integral of w(tau) w(tau)^T over one relative period."""
        return self.switching_period * self.gram_matrix()

    def derivative_matrix(self) -> np.ndarray:
        """Entries -integral of w_k'(tau) w_l(tau); skew-symmetric here.

        The basis functions are continuous and periodic, so integrating by
        parts per piece makes the matrix exactly skew-symmetric up to
        round-off.  Row/column 1 vanish because w_1 is constant.
        """
        n = self.size
        q = np.empty((n, n))
        derivs = [w.derivative() for w in self.functions]
        for k in range(n):
            for l in range(n):
                q[k, l] = -derivs[k].inner(self.functions[l])
        return q

    def sample_grid(self, n_samples: int = 512) -> tuple[np.ndarray, np.ndarray]:
        """(tau, values) table with values[i, k] = w_{k+1}(tau[i])."""
        tau = np.linspace(0.0, 1.0, n_samples)
        vals = np.column_stack([w(tau) for w in self.functions])
        return tau, vals


def build_pwm_basis(n_functions: int, duty_cycle: float,
                    switching_period: float) -> BasisSet:
    """Construct the PWM ripple basis of the requested size.

    The first function is the constant 1; the second is the piecewise
    linear ramp rising on [0, D] and falling on [D, 1] (the shape of the
    first-order current ripple), orthonormalized against the constant.
    Each following function integrates its predecessor and is
    orthonormalized against all earlier ones, raising the piecewise
    polynomial degree by one while keeping the kink at D.
    """
    if n_functions < 1:
        raise ValueError("basis needs at least one function")
    if not 0.0 < duty_cycle < 1.0:
        raise ValueError("duty cycle must lie in (0, 1)")
    if switching_period <= 0.0:
        raise ValueError("switching period must be positive")
    d = duty_cycle
    funcs = [PiecewisePolynomial(d, [1.0], [1.0])]
    if n_functions >= 2:
        ramp = PiecewisePolynomial(d, [0.0, 1.0], [1.0, -1.0])
        funcs.append(_orthonormalize(ramp, funcs))
    for _ in range(3, n_functions + 1):
        funcs.append(_orthonormalize(funcs[-1].antiderivative(), funcs))
    return BasisSet(duty_cycle=d, switching_period=switching_period,
                    functions=tuple(funcs))
