"""Parallel-in-time simulation of PWM-driven linear dynamical systems.

Implements the Parareal algorithm for linear (differential-algebraic)
systems excited by pulse-width modulated sources, with three
interchangeable coarse propagators: classical large-step time stepping,
excitation reduced to a truncated Fourier series, and a multirate
envelope (Galerkin) propagator that resolves the switching ripple with a
small set of periodic basis functions.
"""

from .basis import (
    BasisSet,
    DegenerateBasisError,
    PiecewisePolynomial,
    build_pwm_basis,
)
from .integrator import (
    LinearSystemSolver,
    NonpositiveStepError,
    SingularSystemError,
    implicit_euler_sweep,
    implicit_euler_trajectory,
)
from .model import (
    CallableSource,
    ConstantSource,
    FourierSource,
    LinearDAEModel,
    NonPeriodicSourceError,
    PWMSource,
    SinusoidSource,
    SourceTerm,
    SumSource,
    buck_preset,
)
from .mpde import (
    GalerkinSystem,
    MPDECoarsePropagator,
    assemble_galerkin,
    basis_for_model,
    lift_initial,
    mpde_coarse_propagate,
    project_source,
    reconstruct,
)
from .parareal import (
    CoarseVariant,
    DegenerateNormError,
    DirectPropagator,
    PararealConfig,
    PararealReport,
    ReducedCoarsePropagator,
    SolveLedger,
    coarse_propagate_classical,
    coarse_propagate_reduced,
    fine_propagate,
    jump_metric,
    make_coarse_propagator,
    parareal_run,
    parse_variant,
    window_boundaries,
)

__version__ = "0.1.0"

__all__ = [
    "BasisSet",
    "CallableSource",
    "CoarseVariant",
    "ConstantSource",
    "DegenerateBasisError",
    "DegenerateNormError",
    "DirectPropagator",
    "FourierSource",
    "GalerkinSystem",
    "LinearDAEModel",
    "LinearSystemSolver",
    "MPDECoarsePropagator",
    "NonPeriodicSourceError",
    "NonpositiveStepError",
    "PWMSource",
    "PararealConfig",
    "PararealReport",
    "PiecewisePolynomial",
    "ReducedCoarsePropagator",
    "SingularSystemError",
    "SinusoidSource",
    "SolveLedger",
    "SourceTerm",
    "SumSource",
    "assemble_galerkin",
    "basis_for_model",
    "buck_preset",
    "build_pwm_basis",
    "coarse_propagate_classical",
    "coarse_propagate_reduced",
    "fine_propagate",
    "implicit_euler_sweep",
    "implicit_euler_trajectory",
    "jump_metric",
    "lift_initial",
    "make_coarse_propagator",
    "mpde_coarse_propagate",
    "parareal_run",
    "parse_variant",
    "project_source",
    "reconstruct",
    "window_boundaries",
    "__version__",
]
