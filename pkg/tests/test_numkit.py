"""Tests for the fixed-step numerical kernel.

Expected values are either closed-form (matrix exponentials of
diagonal/Jordan blocks, integrals of trig polynomials, linear ODE
solutions) or cross-checked against scipy, which is a test-only
dependency.
"""

import numpy as np
import pytest
import scipy.integrate
import scipy.linalg

from twoscale.errors import ConfigurationError, DimensionError, DivergenceError
from twoscale.numkit import (
    TimeGrid,
    cumulative_simpson,
    integrate_rk4,
    jacobian_fd,
    mat_exp,
    quad_periodic,
    rk4_step,
    simpson_rule,
)


# ---------------------------------------------------------------- mat_exp


def test_mat_exp_zero_time_is_identity():
    A = np.array([[3.0, -2.0], [7.0, 0.5]])
    assert np.array_equal(mat_exp(A, 0.0), np.eye(2))


def test_mat_exp_zero_matrix_is_identity():
    assert np.array_equal(mat_exp(np.zeros((3, 3)), 2.5), np.eye(3))


def test_mat_exp_jordan_block_closed_form():
    # exp(t*J) for J = [[-1,1],[0,-1]] is e^{-t} [[1,t],[0,1]]
    J = np.array([[-1.0, 1.0], [0.0, -1.0]])
    expected = np.exp(-1.0) * np.array([[1.0, 1.0], [0.0, 1.0]])
    assert np.max(np.abs(mat_exp(J, 1.0) - expected)) < 1e-14


def test_mat_exp_diagonal_closed_form():
    A = np.diag([-1.0, -2.0])
    t = np.log(2.0)
    expected = np.diag([0.5, 0.25])
    assert np.max(np.abs(mat_exp(A, t) - expected)) < 1e-14


def test_mat_exp_semigroup_property():
    rng = np.random.default_rng(42)
    for _ in range(10):
        A = rng.standard_normal((4, 4))
        A = A / max(1.0, np.linalg.norm(A, 2) / 5.0)  # keep ||A|| <= 5
        s, t = 0.7, 1.3
        lhs = mat_exp(A, s + t)
        rhs = mat_exp(A, s) @ mat_exp(A, t)
        assert np.max(np.abs(lhs - rhs)) < 1e-10


def test_mat_exp_matches_scipy():
    rng = np.random.default_rng(7)
    for _ in range(20):
        n = rng.integers(1, 6)
        A = rng.standard_normal((n, n))
        t = float(rng.uniform(-2.0, 2.0))
        ours = mat_exp(A, t)
        ref = scipy.linalg.expm(t * A)
        scale = max(1.0, np.max(np.abs(ref)))
        assert np.max(np.abs(ours - ref)) / scale < 1e-12


def test_mat_exp_rejects_non_square():
    with pytest.raises(DimensionError):
        mat_exp(np.ones((2, 3)))


def test_mat_exp_rejects_non_finite():
    A = np.array([[0.0, np.inf], [0.0, 0.0]])
    with pytest.raises(ConfigurationError):
        mat_exp(A)


# ---------------------------------------------------------- quad_periodic


def test_simpson_rule_weights_sum_to_period():
    nodes, weights = simpson_rule(2.0 * np.pi, 64)
    assert nodes.shape == (65,)
    assert weights.shape == (65,)
    assert abs(float(np.sum(weights)) - 2.0 * np.pi) < 1e-12
    assert nodes[0] == 0.0
    assert abs(nodes[-1] - 2.0 * np.pi) < 1e-12


def test_simpson_rule_rejects_odd_panels():
    with pytest.raises(ConfigurationError):
        simpson_rule(1.0, 5)
    with pytest.raises(ConfigurationError):
        simpson_rule(1.0, 0)
    with pytest.raises(ConfigurationError):
        simpson_rule(-1.0, 4)


def test_quad_periodic_sine_vanishes():
    val = quad_periodic(lambda s: np.array([np.sin(s)]), 2.0 * np.pi, 64)
    assert abs(val[0]) < 1e-12


def test_quad_periodic_sin_squared():
    val = quad_periodic(lambda s: np.array([np.sin(s) ** 2]), 2.0 * np.pi, 256)
    assert abs(val[0] - np.pi) < 1e-10


def test_quad_periodic_constant():
    val = quad_periodic(lambda s: np.array([3.0, -1.0]), 2.0 * np.pi, 16)
    assert np.max(np.abs(val - np.array([6.0 * np.pi, -2.0 * np.pi]))) < 1e-12


def test_quad_periodic_trig_polynomial_exactness():
    # The rule is a Richardson pair of trapezoid rules, so full-period
    # integrals of trig polynomials up to degree n_panels/2 - 1 are exact.
    n_panels = 32
    for k in range(1, n_panels // 2):
        val = quad_periodic(
            lambda s, k=k: np.array([np.cos(k * s), np.sin(k * s)]),
            2.0 * np.pi,
            n_panels,
        )
        assert np.max(np.abs(val)) < 1e-12, f"degree {k}"


def test_quad_periodic_scalar_function_promoted():
    val = quad_periodic(lambda s: 1.0, 2.0, 8)
    assert val.shape == (1,)
    assert abs(val[0] - 2.0) < 1e-14


# ------------------------------------------------------ cumulative_simpson


def test_cumulative_simpson_exact_on_quadratics():
    dt = 0.1
    t = dt * np.arange(11)
    samples = 3.0 * t**2 - 2.0 * t + 1.0
    exact = t**3 - t**2 + t
    out = cumulative_simpson(samples, dt)
    assert np.max(np.abs(out - exact)) < 1e-12


def test_cumulative_simpson_sine_vs_antiderivative():
    dt = np.pi / 200.0
    t = dt * np.arange(201)
    out = cumulative_simpson(np.sin(t), dt)
    exact = 1.0 - np.cos(t)
    assert np.max(np.abs(out - exact)) < 1e-8


def test_cumulative_simpson_matches_scipy_loosely():
    dt = 0.01
    t = dt * np.arange(301)
    samples = np.exp(-t) * np.cos(3.0 * t)
    ours = cumulative_simpson(samples, dt)
    ref = scipy.integrate.cumulative_simpson(samples, dx=dt, initial=0.0)
    assert np.max(np.abs(ours - ref)) < 1e-6


def test_cumulative_simpson_vector_samples():
    dt = 0.05
    t = dt * np.arange(21)
    samples = np.stack([t, t**2], axis=1)
    out = cumulative_simpson(samples, dt)
    assert out.shape == (21, 2)
    assert np.max(np.abs(out[:, 0] - t**2 / 2.0)) < 1e-12
    assert np.max(np.abs(out[:, 1] - t**3 / 3.0)) < 1e-12


def test_cumulative_simpson_needs_three_samples():
    with pytest.raises(ConfigurationError):
        cumulative_simpson(np.array([1.0, 2.0]), 0.1)
    with pytest.raises(ConfigurationError):
        cumulative_simpson(np.array([1.0, 2.0, 3.0]), -0.1)


# ------------------------------------------------------------- jacobian_fd


def test_jacobian_fd_linear_map():
    M = np.array([[1.0, 2.0, -1.0], [0.5, -3.0, 4.0]])
    J = jacobian_fd(lambda x: M @ x, np.array([0.3, -1.2, 2.0]))
    assert J.shape == (2, 3)
    assert np.max(np.abs(J - M)) < 1e-8


def test_jacobian_fd_scalar_square():
    J = jacobian_fd(lambda x: np.array([x[0] ** 2]), np.array([3.0]))
    assert J.shape == (1, 1)
    assert abs(J[0, 0] - 6.0) < 1e-8


def test_jacobian_fd_gradient_at_critical_point():
    J = jacobian_fd(lambda x: np.array([float(x @ x)]), np.zeros(3))
    assert np.max(np.abs(J)) < 1e-9


def test_jacobian_fd_explicit_step():
    J = jacobian_fd(lambda x: np.array([np.sin(x[0])]), np.array([0.7]), h=1e-5)
    assert abs(J[0, 0] - np.cos(0.7)) < 1e-9


def test_jacobian_fd_rejects_matrix_input():
    with pytest.raises(DimensionError):
        jacobian_fd(lambda x: x, np.zeros((2, 2)))


# ------------------------------------------------------------ integrate_rk4


def test_time_grid_validation_and_end():
    grid = TimeGrid(t0=1.0, dt=0.25, n_steps=8)
    assert grid.t_end == 3.0
    assert np.array_equal(grid.times(), 1.0 + 0.25 * np.arange(9))
    with pytest.raises(ConfigurationError):
        TimeGrid(t0=0.0, dt=0.0, n_steps=4)
    with pytest.raises(ConfigurationError):
        TimeGrid(t0=0.0, dt=0.1, n_steps=0)
    with pytest.raises(ConfigurationError):
        TimeGrid(t0=np.inf, dt=0.1, n_steps=4)


def test_rk4_zero_field_is_constant():
    grid = TimeGrid(t0=0.0, dt=0.1, n_steps=50)
    x0 = np.array([1.0, -2.0, 0.5])
    times, states = integrate_rk4(lambda t, x: np.zeros(3), x0, grid)
    assert times.shape == (51,)
    assert states.shape == (51, 3)
    assert np.array_equal(states[-1], x0)


def test_rk4_linear_decay():
    grid = TimeGrid(t0=0.0, dt=1e-3, n_steps=1000)
    _, states = integrate_rk4(lambda t, x: -x, np.array([1.0]), grid)
    assert abs(states[-1, 0] - np.exp(-1.0)) < 1e-8


def test_rk4_harmonic_oscillator_energy_drift():
    # 100 periods at 200 steps per period; the amplitude error of RK4 on
    # a rotation is O(dt^6) per step, so the drift stays tiny.
    steps_per_period = 200
    n_periods = 100
    dt = 2.0 * np.pi / steps_per_period
    grid = TimeGrid(t0=0.0, dt=dt, n_steps=steps_per_period * n_periods)

    def field(t, s):
        return np.array([s[1], -s[0]])

    _, states = integrate_rk4(field, np.array([1.0, 0.0]), grid)
    energy = 0.5 * (states[:, 0] ** 2 + states[:, 1] ** 2)
    assert np.max(np.abs(energy - 0.5)) < 1e-6


def test_rk4_fourth_order_convergence():
    # error ratio under step halving should be close to 2^4 = 16
    def field(t, x):
        return np.array([-x[0] ** 2])

    exact = 1.0 / 2.0  # x' = -x^2, x(0)=1 -> x(t) = 1/(1+t), at t=1

    def err(n_steps):
        grid = TimeGrid(t0=0.0, dt=1.0 / n_steps, n_steps=n_steps)
        _, states = integrate_rk4(field, np.array([1.0]), grid)
        return abs(states[-1, 0] - exact)

    ratio = err(20) / err(40)
    assert 12.0 < ratio < 20.0


def test_rk4_step_matches_integrator_single_step():
    def field(t, x):
        return np.array([np.cos(t) - x[0]])

    x0 = np.array([0.3])
    grid = TimeGrid(t0=0.2, dt=0.05, n_steps=1)
    _, states = integrate_rk4(field, x0, grid)
    manual = rk4_step(field, 0.2, x0, 0.05)
    assert np.array_equal(states[-1], manual)


def test_rk4_divergence_reports_step_and_time():
    # x' = x^2 from x(0)=1 blows up at t=1; overflow to non-finite raises
    grid = TimeGrid(t0=0.0, dt=0.1, n_steps=50)
    with np.errstate(over="ignore", invalid="ignore"):
        with pytest.raises(DivergenceError) as exc_info:
            integrate_rk4(lambda t, x: x**2, np.array([1.0]), grid)
    err = exc_info.value
    assert isinstance(err.step, int) and 1 <= err.step <= 50
    assert abs(err.time - 0.1 * err.step) < 1e-12


def test_rk4_post_step_hook_applied():
    # renormalizing hook keeps the state on the unit circle
    grid = TimeGrid(t0=0.0, dt=0.05, n_steps=200)

    def field(t, s):
        return np.array([s[1], -s[0]])

    def renorm(s):
        return s / np.linalg.norm(s)

    _, states = integrate_rk4(field, np.array([1.0, 0.0]), grid, post_step=renorm)
    radii = np.linalg.norm(states[1:], axis=1)
    assert np.max(np.abs(radii - 1.0)) < 1e-15


def test_rk4_rejects_matrix_state():
    grid = TimeGrid(t0=0.0, dt=0.1, n_steps=1)
    with pytest.raises(DimensionError):
        integrate_rk4(lambda t, x: x, np.zeros((2, 2)), grid)
