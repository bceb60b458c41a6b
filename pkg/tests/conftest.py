import numpy as np
import pytest

from parapwm import (
    DirectPropagator,
    PararealConfig,
    buck_preset,
    make_coarse_propagator,
    parareal_run,
    window_boundaries,
)

BENCH_WINDOWS = 40
BENCH_COARSE_DT = 3e-4
BENCH_FINE_DT = 1e-6
BENCH_TOL = 1e-6


@pytest.fixture(scope="session")
def buck():
    return buck_preset()


def bench_config(variant: str, workers: int = 1, **overrides) -> PararealConfig:
    kwargs = dict(n_windows=BENCH_WINDOWS, coarse_dt=BENCH_COARSE_DT,
                  fine_dt=BENCH_FINE_DT, tol=BENCH_TOL, max_iter=50,
                  coarse_variant=variant, worker_count=workers)
    kwargs.update(overrides)
    return PararealConfig(**kwargs)


@pytest.fixture(scope="session")
def bench(buck):
    """Cached benchmark runs keyed by (variant, workers)."""
    cache = {}

    def get(variant: str, workers: int = 1):
        key = (variant, workers)
        if key not in cache:
            cache[key] = parareal_run(buck, bench_config(variant, workers))
        return cache[key]

    return get


def chain_windows(prop, boundaries, x0) -> np.ndarray:
    """Sequentially propagate window by window; rows are sync values."""
    values = np.empty((len(boundaries), len(x0)))
    values[0] = x0
    x = np.array(x0, dtype=float)
    for i in range(1, len(boundaries)):
        x, _ = prop.propagate(x, boundaries[i - 1], boundaries[i])
        values[i] = x
    return values


@pytest.fixture(scope="session")
def fine_sync(buck):
    """Windowed fine reference at the benchmark sync points."""
    bounds = window_boundaries(buck, BENCH_WINDOWS)
    fine = DirectPropagator(buck, BENCH_FINE_DT)
    return bounds, chain_windows(fine, bounds, buck.x0)


@pytest.fixture(scope="session")
def coarse_sweep_relative_errors(buck, fine_sync):
    """Per-window relative error of the pure coarse sweep, per variant."""
    bounds, ref = fine_sync
    cache = {}

    def get(variant: str) -> np.ndarray:
        if variant not in cache:
            prop = make_coarse_propagator(buck, variant, BENCH_COARSE_DT)
            vals = chain_windows(prop, bounds, buck.x0)
            errs = np.linalg.norm(vals[1:] - ref[1:], axis=1)
            cache[variant] = errs / np.linalg.norm(ref[1:], axis=1)
        return cache[variant]

    return get
