"""Tests for the verification harness.

Oracles: a zero system (deviations must vanish identically), the linear
benchmark (closed-form average and a known O(1/omega) deviation trend),
and a pure boundary-layer system whose transient is exactly
exp(-omega t).
"""

import json

import numpy as np
import pytest

from twoscale.benchmarks import linear_benchmark
from twoscale.errors import ConfigurationError
from twoscale.harness import (
    RunRecord,
    aligned_frame,
    fit_boundary_layer,
    probe_averaged_stability,
    probe_seeker_stability,
    run_compare,
    shell_directions,
    sweep_convergence,
)
from twoscale.seeker import builtin_fields
from twoscale.so3 import manifold_residual
from twoscale.system import OscillatorySystemSpec


def zero_spec():
    return OscillatorySystemSpec(
        n=1,
        m=1,
        T=2.0 * np.pi,
        A=np.array([[-1.0]]),
        phi0=lambda x: np.zeros(1),
        f1=lambda x, y, tau: np.zeros(1),
        f2=lambda x, y, tau: np.zeros(1),
        g1=lambda x, y, tau: np.zeros(1),
        g2=lambda x, y, tau: np.zeros(1),
        name="zero",
    )


def layer_spec(A=None):
    """No slow dynamics at all: only the fast layer contraction."""
    A = np.array([[-1.0]]) if A is None else A
    m = A.shape[0]
    return OscillatorySystemSpec(
        n=1,
        m=m,
        T=2.0 * np.pi,
        A=A,
        phi0=lambda x: np.zeros(m),
        f1=lambda x, y, tau: np.zeros(1),
        f2=lambda x, y, tau: np.zeros(1),
        g1=lambda x, y, tau: np.zeros(m),
        g2=lambda x, y, tau: np.zeros(m),
        name="layer",
    )


def zero_avg(t, x):
    return np.zeros_like(x)


# ---------------------------------------------------------------- run_compare


def test_zero_system_has_zero_deviation():
    record = run_compare(
        zero_spec(), zero_avg, np.zeros(1), np.zeros(1), omega=8.0, t_f=1.0,
        steps_per_period=32, avg_steps=64,
    )
    assert not record.failed
    assert record.max_dev == 0.0
    assert np.max(record.z_norm) == 0.0
    assert record.x_samples.shape[1] == 1
    assert record.sample_times[0] == 0.0
    assert abs(record.sample_times[-1] - record.times[-1]) < 1e-12


def test_linear_benchmark_tracks_closed_form_average():
    bench = linear_benchmark()
    record = run_compare(
        bench.spec, bench.averaged_field, bench.x0, bench.y0,
        omega=16.0 * np.pi, t_f=2.0,
    )
    # the recorded averaged trajectory is the closed-form flow
    final = bench.exact_average(record.sample_times[-1])
    assert np.max(np.abs(record.x_avg_samples[-1] - final)) < 1e-6
    # and the full system stays within the first-order band
    assert record.max_dev < 0.05


def test_deviation_shrinks_with_frequency():
    bench = linear_benchmark()

    def dev(w):
        record = run_compare(
            bench.spec, bench.averaged_field, bench.x0, bench.y0,
            omega=w, t_f=2.0, steps_per_period=200, avg_steps=1000,
        )
        return record.max_dev

    assert dev(16.0 * np.pi) < dev(4.0 * np.pi)


def test_diverging_run_recorded_not_raised():
    spec = zero_spec()
    spec.f2 = lambda x, y, tau: np.array([x[0] ** 2])
    with np.errstate(over="ignore", invalid="ignore"):
        record = run_compare(
            spec, zero_avg, np.array([2.0]), np.zeros(1), omega=8.0, t_f=2.0,
            steps_per_period=64, avg_steps=64,
        )
    assert record.failed
    assert record.blowup_time is not None
    assert 0.0 < record.blowup_time <= 2.0
    assert record.max_dev == float("inf")


def test_run_compare_validation():
    spec = zero_spec()
    with pytest.raises(ConfigurationError):
        run_compare(spec, zero_avg, np.zeros(1), np.zeros(1), 8.0, t_f=0.0)
    with pytest.raises(ConfigurationError):
        run_compare(spec, zero_avg, np.zeros(1), np.zeros(1), 8.0, t_f=1.0,
                    steps_per_period=4)
    with pytest.raises(ConfigurationError):
        run_compare(spec, zero_avg, np.zeros(1), np.zeros(1), 8.0, t_f=1.0, stride=0)


# ---------------------------------------------------------- boundary layer fit


def pure_layer_record(omega=20.0, y0=1.0, A=None):
    spec = layer_spec(A)
    m = spec.m
    y_init = np.full(m, y0) if np.isscalar(y0) else np.asarray(y0)
    return run_compare(
        spec, zero_avg, np.zeros(1), y_init, omega=omega, t_f=2.0,
        steps_per_period=400, avg_steps=100,
    )


def test_layer_fit_recovers_unit_rate():
    record = pure_layer_record(omega=20.0)
    fit = fit_boundary_layer(record)
    # the transient is exactly exp(-omega t): normalized rate 1, gain 1
    assert 0.95 < fit.rate < 1.05
    assert 0.9 < fit.gamma < 1.1
    assert fit.n_points >= 10
    assert fit.t_end > 0.0


def test_layer_fit_rate_scales_with_supplied_frequency():
    record = pure_layer_record(omega=20.0)
    base = fit_boundary_layer(record)
    halved = fit_boundary_layer(record, omega=40.0)
    assert abs(halved.rate - base.rate / 2.0) < 1e-12


def test_layer_fit_needs_an_offset():
    record = pure_layer_record(omega=20.0, y0=0.0)
    with pytest.raises(ConfigurationError, match="offset is zero"):
        fit_boundary_layer(record)


def test_layer_fit_rejects_failed_and_short_runs():
    spec = zero_spec()
    spec.f2 = lambda x, y, tau: np.array([x[0] ** 2])
    with np.errstate(over="ignore", invalid="ignore"):
        failed = run_compare(
            spec, zero_avg, np.array([2.0]), np.zeros(1), omega=8.0, t_f=2.0,
            steps_per_period=64, avg_steps=64,
        )
    with pytest.raises(ConfigurationError):
        fit_boundary_layer(failed)
    record = pure_layer_record(omega=20.0)
    with pytest.raises(ConfigurationError, match="too short"):
        fit_boundary_layer(record, min_points=10**6)


# ------------------------------------------------------------------ sweep


def test_sweep_requires_a_real_ladder():
    bench = linear_benchmark()

    def builder(w):
        return bench.spec, bench.averaged_field, bench.x0.copy(), bench.y0.copy()

    with pytest.raises(ConfigurationError):
        sweep_convergence(builder, [4.0, 8.0, 16.0], t_f=1.0)
    with pytest.raises(ConfigurationError):
        sweep_convergence(builder, [4.0, 8.0, 8.0, 16.0], t_f=1.0)


def test_sweep_linear_benchmark_first_order_trend():
    bench = linear_benchmark()

    def builder(w):
        return bench.spec, bench.averaged_field, bench.x0.copy(), bench.y0.copy()

    omegas = [4.0 * np.pi * 2.0**k for k in range(4)]
    report = sweep_convergence(builder, omegas, t_f=2.0,
                               steps_per_period=200, avg_steps=1000)
    assert report.strictly_decreasing
    assert report.slope <= -0.9
    assert len(report.max_devs) == 4
    # starting on the manifold leaves no transient to fit
    assert report.layer_rates == [None, None, None, None]
    assert report.layer_gammas == [None, None, None, None]


def test_sweep_fits_layers_for_offset_starts():
    # the offset must dominate the O(1/omega) quasi-steady lag so the fit
    # window closes while the transient is still exponential; component 1
    # of the layer matrix decays cleanly at the unit normalized rate
    bench = linear_benchmark()
    y_off = bench.y0 + np.array([5.0, 0.0])

    def builder(w):
        return bench.spec, bench.averaged_field, bench.x0.copy(), y_off.copy()

    omegas = [4.0 * np.pi * 2.0**k for k in range(4)]
    report = sweep_convergence(builder, omegas, t_f=1.0,
                               steps_per_period=200, avg_steps=500)
    for rate, gamma in zip(report.layer_rates, report.layer_gammas):
        assert rate is not None and 0.5 < rate < 1.5
        assert gamma is not None and gamma > 0.0


def test_sweep_report_serializes_to_json():
    bench = linear_benchmark()

    def builder(w):
        return bench.spec, bench.averaged_field, bench.x0.copy(), bench.y0.copy()

    omegas = [4.0, 8.0, 16.0, 32.0]
    report = sweep_convergence(builder, omegas, t_f=0.5,
                               steps_per_period=64, avg_steps=200, fit_layers=False)
    blob = json.dumps(report.as_dict(), sort_keys=True)
    data = json.loads(blob)
    assert data["omegas"] == omegas
    assert set(data) == {
        "omegas", "max_devs", "slope", "intercept", "strictly_decreasing",
        "layer_rates", "layer_gammas", "t_f",
    }


# -------------------------------------------------------------- aligned frame


def test_aligned_frame_properties():
    rng = np.random.default_rng(41)
    for _ in range(25):
        g = rng.uniform(-5.0, 5.0, 3)
        Q = aligned_frame(g)
        assert manifold_residual(Q.T.reshape(9)) < 1e-12
        assert np.max(np.abs(Q[:, 0] - g / np.linalg.norm(g))) < 1e-12


def test_aligned_frame_zero_gradient_is_identity():
    assert np.array_equal(aligned_frame(np.zeros(3)), np.eye(3))
    assert np.array_equal(aligned_frame(1e-14 * np.ones(3)), np.eye(3))


def test_aligned_frame_is_deterministic():
    g = np.array([0.3, -2.0, 1.1])
    assert np.array_equal(aligned_frame(g), aligned_frame(g))


def test_shell_directions_panel():
    dirs = shell_directions()
    assert dirs.shape == (8, 3)
    assert np.max(np.abs(np.linalg.norm(dirs, axis=1) - 1.0)) < 1e-15
    # panel is symmetric: every direction has its antipode
    for d in dirs:
        assert any(np.array_equal(-d, e) for e in dirs)


# ------------------------------------------------------------ averaged probe


def test_averaged_probe_quadratic_field_enters_and_descends():
    fld = builtin_fields()["quadratic"]
    report = probe_averaged_stability(fld, deltas=[2.0], horizon=10.0,
                                      entry_radius=0.5, dt=0.01)
    assert len(report.runs) == 8
    assert report.all_entered
    assert report.max_vc_step_increase <= 1e-9
    for run in report.runs:
        # aligned start makes the approach exponential: r(t) = 2 exp(-t),
        # so the 0.5-ball is entered near t = ln 4
        assert run["entry_time"] is not None
        assert abs(run["entry_time"] - np.log(4.0)) < 0.1
        assert run["final_dist"] < 1e-3
        assert run["final_grad_norm"] < 1e-3
    blob = json.dumps(report.as_dict(), sort_keys=True)
    assert json.loads(blob)["all_entered"] is True


def test_averaged_probe_validation():
    fld = builtin_fields()["quadratic"]
    with pytest.raises(ConfigurationError):
        probe_averaged_stability(fld, deltas=[], horizon=1.0, entry_radius=0.1)


# -------------------------------------------------------------- seeker probe


def test_seeker_probe_verdict_maps_and_determinism():
    fld = builtin_fields()["quadratic"]
    kwargs = dict(
        eps_x=4.0, eps_z=2.0, deltas=[2.0], omegas=[8.0 * np.pi],
        horizon=2.0, entry_deadline=1.5, steps_per_fast_period=40,
    )
    report = probe_seeker_stability(fld, **kwargs)
    assert len(report.runs) == 3 * 8  # three phases, eight directions
    assert report.containment_omega[2.0] == 8.0 * np.pi
    assert report.entry_omega[2.0] == 8.0 * np.pi
    assert report.bounded_omega[2.0] == 8.0 * np.pi
    for run in report.runs:
        assert not run.diverged
        assert run.sup_dist <= 4.0
        assert run.sup_z <= 2.0
    # bit-identical on repeat execution
    again = probe_seeker_stability(fld, **kwargs)
    assert json.dumps(report.as_dict(), sort_keys=True) == json.dumps(
        again.as_dict(), sort_keys=True
    )


def test_seeker_probe_reports_unmet_items_as_none():
    fld = builtin_fields()["quadratic"]
    report = probe_seeker_stability(
        fld, eps_x=0.01, eps_z=2.0, deltas=[2.0], omegas=[8.0 * np.pi],
        horizon=2.0, entry_deadline=1.5, steps_per_fast_period=40,
    )
    # nothing stays within 0.01 of the source from radius 2, but the runs
    # are still bounded
    assert report.containment_omega[2.0] is None
    assert report.bounded_omega[2.0] == 8.0 * np.pi


def test_seeker_probe_validation():
    fld = builtin_fields()["quadratic"]
    with pytest.raises(ConfigurationError):
        probe_seeker_stability(fld, eps_x=1.0, eps_z=1.0, deltas=[],
                               omegas=[4.0], horizon=1.0)
    with pytest.raises(ConfigurationError):
        probe_seeker_stability(fld, eps_x=1.0, eps_z=1.0, deltas=[1.0],
                               omegas=[4.0], horizon=1.0, entry_deadline=2.0)


# ------------------------------------------------------------------ records


def test_empty_record_reports_infinite_deviation():
    empty = np.empty((0,))
    record = RunRecord(
        omega=4.0, t_f=1.0, times=empty, x_dev=empty, z_norm=empty,
        sample_times=empty, x_samples=np.empty((0, 1)),
        y_samples=np.empty((0, 1)), x_avg_samples=np.empty((0, 1)),
        failed=True, blowup_time=0.5,
    )
    assert record.max_dev == float("inf")
