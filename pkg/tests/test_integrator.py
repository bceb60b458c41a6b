import math

import numpy as np
import pytest

from parapwm import (
    LinearSystemSolver,
    NonpositiveStepError,
    SingularSystemError,
    buck_preset,
    implicit_euler_sweep,
    implicit_euler_trajectory,
)

ONE = np.array([[1.0]])
ZERO = np.array([[0.0]])


def f_zero(t):
    return np.zeros(1)


def test_single_step_closed_form():
    # x' = -x, one implicit Euler step: x1 = x0 / (1 + h)
    x, n = implicit_euler_sweep(ONE, ONE, f_zero, [1.0], 0.0, 0.1, 0.1)
    assert n == 1
    assert x[0] == pytest.approx(1.0 / 1.1, rel=1e-15)


def test_pure_quadrature_of_constant_is_exact():
    # M x' = c accumulates h*c per step; dyadic values make it bitwise exact
    x, n = implicit_euler_sweep(ONE, ZERO, lambda t: np.array([2.0]),
                                [0.0], 0.0, 1.0, 0.125)
    assert n == 8
    assert x[0] == 2.0


def test_buck_dc_reaches_steady_state():
    m = buck_preset()
    steady = np.linalg.solve(m.B, [70.0, 0.0])
    x, n = implicit_euler_sweep(m.A, m.B, lambda t: np.array([70.0, 0.0]),
                                [0.0, 0.0], 0.0, 0.1, 1e-6)
    assert n == 100000
    np.testing.assert_allclose(x, steady, rtol=1e-3)


def test_trajectory_endpoints_and_counts():
    m = buck_preset()
    times, states, n = implicit_euler_trajectory(
        m.A, m.B, m.source, m.x0, 0.0, 3e-4, 1e-6)
    assert n == 300
    assert times.shape == (301,)
    assert states.shape == (301, 2)
    assert times[0] == 0.0
    np.testing.assert_array_equal(states[0], m.x0)
    assert abs(times[-1] - 3e-4) <= 1e-12 * 3e-4


def test_first_order_convergence_under_step_halving():
    exact = math.exp(-1.0)
    errors = []
    for h in (1e-2, 5e-3, 2.5e-3):
        x, _ = implicit_euler_sweep(ONE, ONE, f_zero, [1.0], 0.0, 1.0, h)
        errors.append(abs(x[0] - exact))
    for e_coarse, e_fine in zip(errors, errors[1:]):
        assert 1.8 <= e_coarse / e_fine <= 2.2


def test_shortened_final_step_lands_exactly():
    # 1.0 / 0.3 is not an integer: 3 full steps plus one shortened step
    times, states, n = implicit_euler_trajectory(
        ONE, ONE, f_zero, [1.0], 0.0, 1.0, 0.3)
    assert n == 4
    assert times[-1] == 1.0
    h_last = 1.0 - 3 * 0.3
    expected = (1 / 1.3) ** 3 * (1 / (1 + h_last))
    assert states[-1, 0] == pytest.approx(expected, rel=1e-12)


def test_near_integer_ratio_keeps_uniform_steps():
    span = 3 * 0.1 * (1 + 1e-12)
    _, n = implicit_euler_sweep(ONE, ONE, f_zero, [1.0], 0.0, span, 0.1)
    assert n == 3


def test_interval_shorter_than_step_is_one_shortened_step():
    x, n = implicit_euler_sweep(ONE, ONE, f_zero, [1.0], 0.0, 0.04, 0.1)
    assert n == 1
    assert x[0] == pytest.approx(1.0 / 1.04, rel=1e-14)


def test_zero_span_is_identity():
    x, n = implicit_euler_sweep(ONE, ONE, f_zero, [3.0], 2.0, 2.0, 0.1)
    assert n == 0
    assert x[0] == 3.0


def test_reversed_interval_rejected():
    with pytest.raises(ValueError):
        implicit_euler_sweep(ONE, ONE, f_zero, [1.0], 1.0, 0.0, 0.1)


def test_nonpositive_step_rejected():
    for h in (0.0, -0.5):
        with pytest.raises(NonpositiveStepError):
            implicit_euler_sweep(ONE, ONE, f_zero, [1.0], 0.0, 1.0, h)


@pytest.mark.filterwarnings("ignore::scipy.linalg.LinAlgWarning")
def test_singular_system_detected():
    with pytest.raises(SingularSystemError):
        LinearSystemSolver(ONE, -ONE, 1.0)  # M/h + K == 0
    with pytest.raises(SingularSystemError):
        LinearSystemSolver(np.zeros((2, 2)), np.ones((2, 2)), 0.1)  # rank 1


def test_deterministic_bitwise():
    m = buck_preset()
    a = implicit_euler_sweep(m.A, m.B, m.source, m.x0, 0.0, 1e-3, 1e-6)
    b = implicit_euler_sweep(m.A, m.B, m.source, m.x0, 0.0, 1e-3, 1e-6)
    assert a[1] == b[1]
    np.testing.assert_array_equal(a[0], b[0])


def test_prefactored_solver_matches_internal_factorization():
    m = buck_preset()
    solver = LinearSystemSolver(m.A, m.B, 1e-6)
    a, _ = implicit_euler_sweep(m.A, m.B, m.source, m.x0, 0.0, 2e-4, 1e-6)
    b, _ = implicit_euler_sweep(m.A, m.B, m.source, m.x0, 0.0, 2e-4, 1e-6,
                                solver=solver)
    np.testing.assert_array_equal(a, b)


def test_solver_reports_size_and_rejects_bad_shapes():
    solver = LinearSystemSolver(np.eye(3), np.eye(3), 0.5)
    assert solver.size == 3
    with pytest.raises(ValueError):
        LinearSystemSolver(np.eye(3), np.eye(2), 0.5)
