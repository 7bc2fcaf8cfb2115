"""Tests for the built-in benchmark problems.

Each benchmark claims a closed form; these tests verify the claim
directly (exact solutions satisfy their differential equations, averages
solve in closed form) rather than trusting the stored expressions.
"""

import numpy as np
import pytest

from twoscale.benchmarks import (
    SEEKER_P0,
    bracket_benchmark,
    bvp_cosine_case,
    bvp_jordan_case,
    field_by_name,
    linear_benchmark,
    seeker_builder,
)
from twoscale.numkit import mat_exp, quad_periodic
from twoscale.system import check_assumption_A


def phase_derivative(fun, tau, h=1e-6):
    return (np.asarray(fun(tau + h)) - np.asarray(fun(tau - h))) / (2.0 * h)


# ----------------------------------------------------------------- BVP cases


def test_bvp_exact_solutions_satisfy_their_equations():
    for case in (bvp_cosine_case(), bvp_jordan_case()):
        for tau in np.linspace(0.0, case.T, 11):
            lhs = phase_derivative(case.exact, tau)
            rhs = case.A @ case.exact(tau) + np.asarray(case.b(None, tau))
            assert np.max(np.abs(lhs - rhs)) < 1e-8, case.name


def test_bvp_exact_solutions_are_periodic():
    for case in (bvp_cosine_case(), bvp_jordan_case()):
        gap = np.asarray(case.exact(0.0)) - np.asarray(case.exact(case.T))
        assert np.max(np.abs(gap)) < 1e-12, case.name


def test_bvp_case_metadata():
    cos_case = bvp_cosine_case()
    assert cos_case.name == "cosine-1d"
    assert cos_case.A.shape == (1, 1)
    jordan = bvp_jordan_case()
    assert jordan.name == "jordan-2d"
    assert np.array_equal(jordan.A, np.array([[-1.0, 1.0], [0.0, -1.0]]))
    assert jordan.T == 2.0 * np.pi


# ----------------------------------------------------------- linear benchmark


def test_linear_benchmark_average_matrix():
    bench = linear_benchmark()
    expected = np.array([[-0.4, 1.0], [-1.0, -0.4]])
    assert np.max(np.abs(bench.Mbar - expected)) < 1e-15
    x = np.array([0.3, -1.2])
    assert np.array_equal(bench.averaged_field(5.0, x), bench.Mbar @ x)


def test_linear_benchmark_exact_average_solves_the_ode():
    bench = linear_benchmark()
    assert np.array_equal(bench.exact_average(0.0), bench.x0)
    for t in (0.5, 2.0):
        h = 1e-6
        lhs = (bench.exact_average(t + h) - bench.exact_average(t - h)) / (2.0 * h)
        rhs = bench.Mbar @ bench.exact_average(t)
        assert np.max(np.abs(lhs - rhs)) < 1e-7
    expected = mat_exp(bench.Mbar, 1.5) @ bench.x0
    assert np.max(np.abs(bench.exact_average(1.5) - expected)) < 1e-14


def test_linear_benchmark_starts_on_manifold():
    bench = linear_benchmark()
    assert np.array_equal(bench.y0, bench.spec.phi0(bench.x0))
    assert check_assumption_A(bench.spec).ok


# ---------------------------------------------------------- bracket benchmark


def test_bracket_benchmark_oscillation_has_zero_mean():
    bench = bracket_benchmark()
    x = np.array([0.7, -1.4])
    y = np.zeros(1)
    mean = quad_periodic(lambda s: bench.spec.f1(x, y, s), bench.spec.T, 128)
    assert np.max(np.abs(mean)) < 1e-12
    assert check_assumption_A(bench.spec).ok


def test_bracket_benchmark_exact_average_form():
    bench = bracket_benchmark()
    for x in (np.array([0.0, 1.0]), np.array([2.0, -3.0])):
        assert np.array_equal(bench.fbar_exact(x), np.array([2.0 * x[1], 0.0]))


# -------------------------------------------------------------- seeker builder


def test_seeker_builder_default_start():
    assert np.array_equal(SEEKER_P0, np.array([6.0, 2.0, -2.0]))
    fld = field_by_name("log")
    build = seeker_builder(fld)
    spec, avg, x0, y0 = build(4.0 * np.pi)
    assert np.array_equal(x0[0:3], SEEKER_P0)
    assert np.array_equal(x0[3:12], np.eye(3).T.reshape(9))
    c0 = fld.c(SEEKER_P0)
    assert np.array_equal(y0, np.array([c0, c0]))
    assert spec.n == 12 and spec.m == 2


def test_seeker_builder_shares_decomposition_across_frequencies():
    build = seeker_builder(field_by_name("quadratic"))
    spec_a, avg_a, x_a, y_a = build(4.0 * np.pi)
    spec_b, avg_b, x_b, y_b = build(8.0 * np.pi)
    assert spec_a is spec_b
    assert avg_a is avg_b
    # returned states are fresh copies, safe to mutate
    x_a[0] = 99.0
    _, _, x_c, _ = build(4.0 * np.pi)
    assert x_c[0] == 6.0


def test_seeker_builder_zero_filter_mode():
    build = seeker_builder(field_by_name("log"), y0_mode="zero")
    _, _, _, y0 = build(4.0 * np.pi)
    assert np.array_equal(y0, np.zeros(2))
    with pytest.raises(ValueError):
        seeker_builder(field_by_name("log"), y0_mode="warm")


def test_seeker_builder_custom_start():
    p0 = np.array([1.0, 1.0, 1.0])
    R0 = np.eye(3)
    build = seeker_builder(field_by_name("quadratic"), p0=p0, R0=R0)
    _, _, x0, y0 = build(16.0 * np.pi)
    assert np.array_equal(x0[0:3], p0)
    assert np.array_equal(y0, np.array([-1.5, -1.5]))


def test_field_by_name_lookup():
    assert field_by_name("log").name == "log"
    assert field_by_name("quadratic").name == "quadratic"
    with pytest.raises(KeyError, match="choices"):
        field_by_name("gaussian")
