"""Linear DAE models A*dx/dt + B*x = c(t) and their source terms.

Sources are tagged kinds (PWM pulse train, constant, sinusoid, truncated
Fourier series, sums, and raw callables) instead of opaque functions so
that downstream consumers can reduce them to Fourier series or project
them onto periodic basis sets analytically where the kind allows it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np


class NonPeriodicSourceError(ValueError):
    """Raised when an operation needs a periodic source but none is available."""


def _readonly(a) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.setflags(write=False)
    return out


class SourceTerm:
    """Base class for time-dependent right-hand sides c(t) in R^ndim.

    Subclasses set ``ndim`` and implement ``__call__``. ``period`` is the
    fundamental repeat time, or ``None`` when the source is aperiodic
    (constants report ``None`` but are compatible with every period, see
    ``is_periodic_with``).
    """

    ndim: int
    period: float | None = None

    def __call__(self, t: float) -> np.ndarray:
        raise NotImplementedError

    def is_periodic_with(self, T: float) -> bool:
        """Whether the source repeats with period T (T may be a multiple)."""
        if self.period is None:
            return False
        ratio = T / self.period
        return abs(ratio - round(ratio)) <= 1e-9 and round(ratio) >= 1

    def mean(self) -> np.ndarray:
        """Average over one fundamental period."""
        raise NonPeriodicSourceError(
            f"{type(self).__name__} has no period average")

    def truncated_fourier(self, n_harmonics: int) -> "SourceTerm":
        """DC component plus the n_harmonics lowest harmonics of this source.

        Returns a source evaluating the truncated series; with
        ``n_harmonics=0`` only the period mean remains.
        """
        raise NonPeriodicSourceError(
            f"{type(self).__name__} cannot be reduced to a Fourier series")


@dataclass(frozen=True)
class ConstantSource(SourceTerm):
    """Constant right-hand side."""

    values: np.ndarray = field(default_factory=lambda: np.zeros(1))

    def __post_init__(self):
        object.__setattr__(self, "values", _readonly(np.atleast_1d(self.values)))
        object.__setattr__(self, "ndim", self.values.shape[0])

    def __call__(self, t: float) -> np.ndarray:
        return self.values.copy()

    def is_periodic_with(self, T: float) -> bool:
        return True

    def mean(self) -> np.ndarray:
        return self.values.copy()

    def truncated_fourier(self, n_harmonics: int) -> "ConstantSource":
        return self


@dataclass(frozen=True)
class PWMSource(SourceTerm):
    """Two-level pulse train produced by comparing a reference to a carrier.

    The pulse value is ``amplitude/2 * (sgn(r(t) - s(t)) + 1)`` with
    ``sgn(0) := +1`` (ties switch "on").  Defaults are the constant
    reference ``r(t) = duty_cycle`` and the sawtooth carrier
    ``s(t) = t*switching_frequency mod 1``, which yield a pulse that is on
    for the first ``duty_cycle`` fraction of every switching period.  The
    pulse drives a single state equation (``channel``); other components
    of the returned vector are zero.

    Custom ``reference``/``carrier`` callables are supported for other
    modulation shapes; they are assumed to keep the output periodic with
    the switching period.  Analytic Fourier reduction is exact only for
    the default shapes and falls back to quadrature otherwise.
    """

    amplitude: float = 1.0
    switching_frequency: float = 1.0
    duty_cycle: float = 0.5
    reference: Callable[[float], float] | None = None
    carrier: Callable[[float], float] | None = None
    channel: int = 0
    ndim: int = 1

    def __post_init__(self):
        if self.switching_frequency <= 0:
            raise ValueError("switching_frequency must be positive")
        if not 0.0 < self.duty_cycle < 1.0:
            raise ValueError("duty_cycle must lie in (0, 1)")
        if not 0 <= self.channel < self.ndim:
            raise ValueError("channel out of range")
        object.__setattr__(self, "period", 1.0 / self.switching_frequency)

    @property
    def switching_period(self) -> float:
        return 1.0 / self.switching_frequency

    def pulse(self, t: float) -> float:
        """Scalar pulse value at time t."""
        r = self.duty_cycle if self.reference is None else self.reference(t)
        if self.carrier is None:
            s = (t * self.switching_frequency) % 1.0
        else:
            s = self.carrier(t)
        return self.amplitude if r - s >= 0.0 else 0.0

    def __call__(self, t: float) -> np.ndarray:
        out = np.zeros(self.ndim)
        out[self.channel] = self.pulse(t)
        return out

    @property
    def has_default_shape(self) -> bool:
        return self.reference is None and self.carrier is None

    def mean(self) -> np.ndarray:
        out = np.zeros(self.ndim)
        if self.has_default_shape:
            out[self.channel] = self.duty_cycle * self.amplitude
        else:
            out[self.channel] = _periodic_quadrature(
                self.pulse, self.switching_period)
        return out

    def harmonic_coefficients(self, n_harmonics: int) -> np.ndarray:
        """Complex Fourier coefficients c_1..c_M of the scalar pulse.

        Convention: pulse(t) = c_0 + sum_m 2*Re(c_m * exp(2i*pi*m*t/T_s)).
        For the default sawtooth/constant shapes,
        c_m = amplitude * (1 - exp(-2i*pi*m*D)) / (2i*pi*m).
        """
        m = np.arange(1, n_harmonics + 1)
        if self.has_default_shape:
            return self.amplitude * (
                1.0 - np.exp(-2j * np.pi * m * self.duty_cycle)
            ) / (2j * np.pi * m)
        T = self.switching_period
        return np.array([
            _periodic_quadrature(
                lambda t, mm=mm: self.pulse(t) * np.exp(-2j * np.pi * mm * t / T), T)
            for mm in m
        ])

    def truncated_fourier(self, n_harmonics: int) -> "FourierSource":
        coeffs = np.zeros((n_harmonics, self.ndim), dtype=complex)
        coeffs[:, self.channel] = self.harmonic_coefficients(n_harmonics)
        return FourierSource(period=self.switching_period, dc=self.mean(),
                             coefficients=coeffs)


@dataclass(frozen=True)
class SinusoidSource(SourceTerm):
    """offset + amplitude * sin(2*pi*frequency*t + phase) on one channel."""

    amplitude: float = 1.0
    frequency: float = 1.0
    phase: float = 0.0
    offset: float = 0.0
    channel: int = 0
    ndim: int = 1

    def __post_init__(self):
        if self.frequency <= 0:
            raise ValueError("frequency must be positive")
        if not 0 <= self.channel < self.ndim:
            raise ValueError("channel out of range")
        object.__setattr__(self, "period", 1.0 / self.frequency)

    def __call__(self, t: float) -> np.ndarray:
        out = np.zeros(self.ndim)
        out[self.channel] = self.offset + self.amplitude * math.sin(
            2.0 * math.pi * self.frequency * t + self.phase)
        return out

    def mean(self) -> np.ndarray:
        out = np.zeros(self.ndim)
        out[self.channel] = self.offset
        return out

    def truncated_fourier(self, n_harmonics: int) -> "SourceTerm":
        if n_harmonics >= 1:
            return self
        return ConstantSource(self.mean())


@dataclass(frozen=True)
class FourierSource(SourceTerm):
    """Truncated Fourier series: dc + sum_m 2*Re(coefficients[m-1]*e^{2i*pi*m*t/period}).

    ``coefficients`` has shape (n_harmonics, ndim); row m-1 holds the
    complex coefficient of harmonic m for every component.
    """

    period: float = 1.0
    dc: np.ndarray = field(default_factory=lambda: np.zeros(1))
    coefficients: np.ndarray = field(
        default_factory=lambda: np.zeros((0, 1), dtype=complex))

    def __post_init__(self):
        if self.period <= 0:
            raise ValueError("period must be positive")
        dc = _readonly(np.atleast_1d(self.dc))
        coeff = np.array(self.coefficients, dtype=complex)
        if coeff.size == 0:
            coeff = coeff.reshape(0, dc.shape[0])
        if coeff.ndim != 2 or coeff.shape[1] != dc.shape[0]:
            raise ValueError("coefficients must have shape (n_harmonics, ndim)")
        coeff.setflags(write=False)
        object.__setattr__(self, "dc", dc)
        object.__setattr__(self, "coefficients", coeff)
        object.__setattr__(self, "ndim", dc.shape[0])

    @property
    def n_harmonics(self) -> int:
        return self.coefficients.shape[0]

    def __call__(self, t: float) -> np.ndarray:
        out = self.dc.copy()
        if self.n_harmonics:
            m = np.arange(1, self.n_harmonics + 1)
            phase = np.exp(2j * np.pi * m * (t / self.period))
            out += 2.0 * np.real(phase @ self.coefficients)
        return out

    def mean(self) -> np.ndarray:
        return self.dc.copy()

    def truncated_fourier(self, n_harmonics: int) -> "FourierSource":
        if n_harmonics >= self.n_harmonics:
            return self
        return FourierSource(period=self.period, dc=self.dc,
                             coefficients=self.coefficients[:n_harmonics])


@dataclass(frozen=True)
class SumSource(SourceTerm):
    """Pointwise sum of sources of equal dimension."""

    terms: tuple[SourceTerm, ...] = ()

    def __post_init__(self):
        terms = tuple(self.terms)
        if not terms:
            raise ValueError("SumSource needs at least one term")
        ndim = terms[0].ndim
        if any(s.ndim != ndim for s in terms):
            raise ValueError("summed sources must share ndim")
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "ndim", ndim)
        periods = [s.period for s in terms if s.period is not None]
        object.__setattr__(self, "period", max(periods) if periods else None)

    def __call__(self, t: float) -> np.ndarray:
        out = self.terms[0](t)
        for s in self.terms[1:]:
            out += s(t)
        return out

    def is_periodic_with(self, T: float) -> bool:
        return all(s.is_periodic_with(T) for s in self.terms)

    def mean(self) -> np.ndarray:
        return sum((s.mean() for s in self.terms), np.zeros(self.ndim))

    def truncated_fourier(self, n_harmonics: int) -> "SumSource":
        return SumSource(tuple(s.truncated_fourier(n_harmonics)
                               for s in self.terms))


@dataclass(frozen=True)
class CallableSource(SourceTerm):
    """Wraps an arbitrary function t -> vector; declare ``period`` if known.

    Without a declared period the source cannot be averaged, reduced or
    projected, and consumers needing periodicity raise
    ``NonPeriodicSourceError``.
    """

    fn: Callable[[float], np.ndarray] = lambda t: np.zeros(1)
    ndim: int = 1
    period: float | None = None

    def __call__(self, t: float) -> np.ndarray:
        return np.asarray(self.fn(t), dtype=float)

    def mean(self) -> np.ndarray:
        if self.period is None:
            raise NonPeriodicSourceError(
                "CallableSource without declared period cannot be averaged")
        return _periodic_quadrature(self, self.period)

    def truncated_fourier(self, n_harmonics: int) -> "FourierSource":
        if self.period is None:
            raise NonPeriodicSourceError(
                "CallableSource without declared period cannot be reduced")
        T = self.period
        coeffs = np.empty((n_harmonics, self.ndim), dtype=complex)
        for m in range(1, n_harmonics + 1):
            coeffs[m - 1] = _periodic_quadrature(
                lambda t: self(t) * np.exp(-2j * np.pi * m * t / T), T)
        return FourierSource(period=T, dc=self.mean(), coefficients=coeffs)


def _gauss_nodes(n_panels: int, T: float, order: int = 8):
    """Composite Gauss-Legendre nodes/weights on [0, T]."""
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(0.0, T, n_panels + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * (edges[1] - edges[0])
    nodes = (mid[:, None] + half * x[None, :]).ravel()
    weights = np.tile(half * w, n_panels)
    return nodes, weights


def _periodic_quadrature(f, T: float, n_panels: int = 2048):
    """(1/T) * integral of f over one period, composite Gauss quadrature.

    Works for scalar-, vector- and complex-valued f; accuracy for
    discontinuous integrands (custom pulse shapes) is aliasing-limited by
    the panel width.
    """
    nodes, weights = _gauss_nodes(n_panels, T)
    vals = np.array([f(t) for t in nodes])
    return (weights @ vals) / T


@dataclass(frozen=True)
class LinearDAEModel:
    """Initial value problem A*dx/dt + B*x = c(t) on [t0, t_end].

    A may be singular (differential-algebraic case); the implicit Euler
    integrator only requires A/h + B to be regular.
    """

    A: np.ndarray
    B: np.ndarray
    source: SourceTerm
    x0: np.ndarray
    t0: float = 0.0
    t_end: float = 1.0

    def __post_init__(self):
        A = _readonly(np.atleast_2d(self.A))
        B = _readonly(np.atleast_2d(self.B))
        x0 = _readonly(np.atleast_1d(self.x0))
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("A must be square")
        if B.shape != A.shape:
            raise ValueError("B must match the shape of A")
        n = A.shape[0]
        if n < 1:
            raise ValueError("system dimension must be >= 1")
        if x0.shape != (n,):
            raise ValueError(f"x0 must have length {n}")
        if not self.t_end > self.t0:
            raise ValueError("t_end must exceed t0")
        if self.source.ndim != n:
            raise ValueError(
                f"source dimension {self.source.ndim} != system dimension {n}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "x0", x0)

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    def eval_source(self, t: float) -> np.ndarray:
        """Right-hand side vector c(t)."""
        return self.source(t)


def buck_preset() -> LinearDAEModel:
    """Buck (DC-DC) converter benchmark model.

    States are the inductor current and the capacitor voltage of the output
    filter; the transistor stage is modeled as a PWM voltage source feeding
    the inductor equation.  L = 1 mH, C = 0.1 mF, R_L = 10 mOhm, R = 0.8 Ohm,
    100 V pulse at 5 kHz with duty cycle 0.7, simulated over [0, 12] ms from
    a zero initial state.
    """
    L, C = 1e-3, 1e-4
    R_L, R = 1e-2, 0.8
    source = PWMSource(amplitude=100.0, switching_frequency=5e3,
                       duty_cycle=0.7, channel=0, ndim=2)
    return LinearDAEModel(
        A=np.diag([L, C]),
        B=np.array([[R_L, 1.0], [-1.0, 1.0 / R]]),
        source=source,
        x0=np.zeros(2),
        t0=0.0,
        t_end=12e-3,
    )
