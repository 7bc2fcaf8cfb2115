"""Verification harness: full-versus-averaged runs, frequency sweeps,
boundary-layer fits, and practical-stability probes.

Runs on the (frequency, initial condition) grid are independent of each
other; they are executed sequentially so repeated invocations are
bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigurationError, DivergenceError
from .numkit import TimeGrid, integrate_rk4
from .seeker import (
    ScalarField,
    SeekerConfig,
    averaged_seeker_field,
    lyapunov_value_and_rate,
    simulate_seeker,
)
from .so3 import embed
from .system import OscillatorySystemSpec, assemble_full_field

__all__ = [
    "RunRecord",
    "run_compare",
    "SweepReport",
    "sweep_convergence",
    "LayerFit",
    "fit_boundary_layer",
    "shell_directions",
    "aligned_frame",
    "ProbeRun",
    "StabilityProbeReport",
    "probe_seeker_stability",
    "AveragedProbeReport",
    "probe_averaged_stability",
]


@dataclass
class RunRecord:
    """One full-versus-averaged comparison at a fixed frequency.

    The deviation and layer series are kept at full step resolution (they
    are scalars); the state samples are thinned by the stride.
    """

    omega: float
    t_f: float
    times: np.ndarray
    x_dev: np.ndarray
    z_norm: np.ndarray
    sample_times: np.ndarray
    x_samples: np.ndarray
    y_samples: np.ndarray
    x_avg_samples: np.ndarray
    failed: bool = False
    blowup_time: float | None = None

    @property
    def max_dev(self) -> float:
        if self.failed or self.x_dev.size == 0:
            return float("inf")
        return float(np.max(self.x_dev))


def _interp_rows(t_query: np.ndarray, t_data: np.ndarray, rows: np.ndarray) -> np.ndarray:
    out = np.empty((t_query.shape[0], rows.shape[1]))
    for j in range(rows.shape[1]):
        out[:, j] = np.interp(t_query, t_data, rows[:, j])
    return out


def run_compare(
    spec: OscillatorySystemSpec,
    averaged: Callable[[float, np.ndarray], np.ndarray],
    x0: np.ndarray,
    y0: np.ndarray,
    omega: float,
    t_f: float,
    steps_per_period: int = 400,
    avg_steps: int = 4000,
    stride: int = 20,
) -> RunRecord:
    """Integrate the full system and its average from matched starts.

    The full run resolves the fast phase with steps_per_period RK4 steps
    per t-period T/omega; the averaged run uses a coarse grid and is
    interpolated onto the fast times.  A diverging full run is recorded
    as failed with its blow-up time rather than raised.
    """
    if not (np.isfinite(t_f) and t_f > 0.0):
        raise ConfigurationError(f"t_f must be positive, got {t_f}")
    if steps_per_period < 8:
        raise ConfigurationError(f"steps_per_period must be >= 8, got {steps_per_period}")
    if stride < 1:
        raise ConfigurationError(f"stride must be >= 1, got {stride}")
    avg_field = averaged.field if hasattr(averaged, "field") else averaged

    dt = (spec.T / omega) / steps_per_period
    n_steps = max(1, int(round(t_f / dt)))
    grid = TimeGrid(t0=0.0, dt=dt, n_steps=n_steps)
    v0 = spec.pack(np.asarray(x0, dtype=float), np.asarray(y0, dtype=float))

    empty = np.empty((0,))
    try:
        times, states = integrate_rk4(assemble_full_field(spec, omega), v0, grid)
    except DivergenceError as err:
        return RunRecord(
            omega=omega,
            t_f=t_f,
            times=empty,
            x_dev=empty,
            z_norm=empty,
            sample_times=empty,
            x_samples=np.empty((0, spec.n)),
            y_samples=np.empty((0, spec.m)),
            x_avg_samples=np.empty((0, spec.n)),
            failed=True,
            blowup_time=err.time,
        )

    avg_grid = TimeGrid(t0=0.0, dt=t_f / avg_steps, n_steps=avg_steps)
    avg_times, avg_states = integrate_rk4(avg_field, np.asarray(x0, dtype=float), avg_grid)
    x_avg_full = _interp_rows(times, avg_times, avg_states)

    x_full = states[:, : spec.n]
    y_full = states[:, spec.n :]
    x_dev = np.max(np.abs(x_full - x_avg_full), axis=1)
    z_norm = np.array(
        [float(np.linalg.norm(y_full[k] - np.asarray(spec.phi0(x_full[k]), dtype=float)))
         for k in range(x_full.shape[0])]
    )

    keep = np.arange(0, n_steps + 1, stride)
    if keep[-1] != n_steps:
        keep = np.append(keep, n_steps)
    return RunRecord(
        omega=omega,
        t_f=t_f,
        times=times,
        x_dev=x_dev,
        z_norm=z_norm,
        sample_times=times[keep],
        x_samples=x_full[keep],
        y_samples=y_full[keep],
        x_avg_samples=x_avg_full[keep],
    )


@dataclass
class LayerFit:
    """Log-linear fit of the fast transient ||y - phi0(x)||.

    rate is normalized by omega: the transient is modeled as
    gamma * z(0) * exp(-rate * omega * t) over the window ending at the
    first drop below the window fraction of z(0).
    """

    rate: float
    gamma: float
    n_points: int
    t_end: float


def fit_boundary_layer(
    record: RunRecord,
    omega: float | None = None,
    window_fraction: float = 0.05,
    min_points: int = 10,
) -> LayerFit:
    """Fit the initial fast-transient decay rate from a run record."""
    if record.failed:
        raise ConfigurationError("cannot fit a boundary layer on a failed run")
    w = record.omega if omega is None else float(omega)
    t = record.times
    z = record.z_norm
    z0 = float(z[0])
    if not z0 > 0.0:
        raise ConfigurationError("initial layer offset is zero; nothing to fit")
    below = np.nonzero(z < window_fraction * z0)[0]
    end = int(below[0]) + 1 if below.size > 0 else z.shape[0]
    if end < min_points:
        raise ConfigurationError(
            f"transient too short to fit: {end} samples before the drop, need {min_points}"
        )
    tw = w * (t[:end] - t[0])
    logs = np.log(np.maximum(z[:end], 1e-300))
    slope, intercept = np.polyfit(tw, logs, 1)
    return LayerFit(
        rate=float(-slope),
        gamma=float(np.exp(intercept) / z0),
        n_points=end,
        t_end=float(t[end - 1]),
    )


@dataclass
class SweepReport:
    """Deviation-versus-frequency sweep with its log-log slope fit."""

    omegas: list[float]
    max_devs: list[float]
    slope: float
    intercept: float
    strictly_decreasing: bool
    layer_rates: list[float | None]
    layer_gammas: list[float | None]
    t_f: float

    def as_dict(self) -> dict:
        return {
            "omegas": [float(w) for w in self.omegas],
            "max_devs": [float(e) for e in self.max_devs],
            "slope": float(self.slope),
            "intercept": float(self.intercept),
            "strictly_decreasing": bool(self.strictly_decreasing),
            "layer_rates": [None if r is None else float(r) for r in self.layer_rates],
            "layer_gammas": [None if g is None else float(g) for g in self.layer_gammas],
            "t_f": float(self.t_f),
        }


def sweep_convergence(
    builder: Callable[[float], tuple],
    omegas: Sequence[float],
    t_f: float,
    steps_per_period: int = 400,
    avg_steps: int = 4000,
    fit_layers: bool = True,
) -> SweepReport:
    """Run the full-versus-averaged comparison across a frequency ladder.

    builder(omega) returns (spec, averaged, x0, y0).  Requires at least
    four strictly increasing frequencies so the slope fit means
    something.  A run whose layer fit is degenerate reports None for its
    rate; a diverging run reports an infinite deviation.
    """
    omegas = [float(w) for w in omegas]
    if len(omegas) < 4:
        raise ConfigurationError(f"need at least 4 frequencies, got {len(omegas)}")
    if any(b <= a for a, b in zip(omegas, omegas[1:])):
        raise ConfigurationError("frequencies must be strictly increasing")

    max_devs: list[float] = []
    layer_rates: list[float | None] = []
    layer_gammas: list[float | None] = []
    for w in omegas:
        spec, averaged, x0, y0 = builder(w)
        record = run_compare(
            spec, averaged, x0, y0, w, t_f,
            steps_per_period=steps_per_period, avg_steps=avg_steps,
        )
        max_devs.append(record.max_dev)
        fit = None
        if fit_layers and not record.failed:
            try:
                fit = fit_boundary_layer(record)
            except ConfigurationError:
                fit = None
        layer_rates.append(None if fit is None else fit.rate)
        layer_gammas.append(None if fit is None else fit.gamma)

    logs_w = np.log(omegas)
    logs_e = np.log(np.maximum(max_devs, 1e-300))
    slope, intercept = np.polyfit(logs_w, logs_e, 1)
    decreasing = all(b < a for a, b in zip(max_devs, max_devs[1:]))
    return SweepReport(
        omegas=omegas,
        max_devs=max_devs,
        slope=float(slope),
        intercept=float(intercept),
        strictly_decreasing=decreasing,
        layer_rates=layer_rates,
        layer_gammas=layer_gammas,
        t_f=float(t_f),
    )


def shell_directions() -> np.ndarray:
    """Eight deterministic unit directions: the axes and two diagonals."""
    dirs = [
        [1.0, 0.0, 0.0], [-1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0], [0.0, -1.0, 0.0],
        [0.0, 0.0, 1.0], [0.0, 0.0, -1.0],
    ]
    diag = 1.0 / np.sqrt(3.0)
    dirs.append([diag, diag, diag])
    dirs.append([-diag, -diag, -diag])
    return np.array(dirs)


def aligned_frame(g: np.ndarray) -> np.ndarray:
    """Rotation whose first column points along g, completed deterministically.

    The probes start every run with the heading aligned to the local
    ascent direction; a zero gradient falls back to the identity.  The
    remaining columns come from projecting out the least-aligned
    coordinate axis, so the construction has no arbitrary choices.
    """
    g = np.asarray(g, dtype=float)
    norm = float(np.linalg.norm(g))
    if norm < 1e-12:
        return np.eye(3)
    q1 = g / norm
    helper = np.zeros(3)
    helper[int(np.argmin(np.abs(q1)))] = 1.0
    q2 = helper - float(helper @ q1) * q1
    q2 /= np.linalg.norm(q2)
    q3 = np.cross(q1, q2)
    return np.column_stack([q1, q2, q3])


@dataclass
class ProbeRun:
    """Outcome of one probe trajectory."""

    delta: float
    omega: float
    phase_index: int
    direction_index: int
    sup_dist: float
    sup_z: float
    tail_dist: float
    tail_z: float
    entry_time: float | None
    diverged: bool

    def as_dict(self) -> dict:
        return {
            "delta": float(self.delta),
            "omega": float(self.omega),
            "phase_index": self.phase_index,
            "direction_index": self.direction_index,
            "sup_dist": float(self.sup_dist),
            "sup_z": float(self.sup_z),
            "tail_dist": float(self.tail_dist),
            "tail_z": float(self.tail_z),
            "entry_time": None if self.entry_time is None else float(self.entry_time),
            "diverged": bool(self.diverged),
        }


@dataclass
class StabilityProbeReport:
    """Grid verdicts for the three practical-stability items.

    Quantifiers are approximated on the given grids: eight shell
    directions, three start phases per frequency, and sampled time.  For
    each shell radius the report lists the smallest probed frequency at
    which every panel run satisfies the item, or None.
    """

    eps_x: float
    eps_z: float
    deltas: list[float]
    omegas: list[float]
    horizon: float
    entry_deadline: float
    runs: list[ProbeRun]
    containment_omega: dict[float, float | None] = dataclass_field(default_factory=dict)
    entry_omega: dict[float, float | None] = dataclass_field(default_factory=dict)
    bounded_omega: dict[float, float | None] = dataclass_field(default_factory=dict)

    def as_dict(self) -> dict:
        def grid_map(d: dict[float, float | None]) -> list:
            return [
                {"delta": float(k), "omega": None if v is None else float(v)}
                for k, v in sorted(d.items())
            ]

        return {
            "eps_x": float(self.eps_x),
            "eps_z": float(self.eps_z),
            "deltas": [float(d) for d in self.deltas],
            "omegas": [float(w) for w in self.omegas],
            "horizon": float(self.horizon),
            "entry_deadline": float(self.entry_deadline),
            "containment_omega": grid_map(self.containment_omega),
            "entry_omega": grid_map(self.entry_omega),
            "bounded_omega": grid_map(self.bounded_omega),
            "runs": [r.as_dict() for r in self.runs],
        }


def _entry_time(times: np.ndarray, dist: np.ndarray, eps: float) -> float | None:
    """First sample time after which the distance never exceeds eps."""
    above = np.nonzero(dist > eps)[0]
    if above.size == 0:
        return float(times[0])
    last = int(above[-1])
    if last + 1 >= times.shape[0]:
        return None
    return float(times[last + 1])


def probe_seeker_stability(
    fld: ScalarField,
    eps_x: float,
    eps_z: float,
    deltas: Sequence[float],
    omegas: Sequence[float],
    horizon: float,
    entry_deadline: float | None = None,
    steps_per_fast_period: int = 100,
    phase_fractions: Sequence[float] = (0.0, 0.25, 0.5),
) -> StabilityProbeReport:
    """Probe the closed-loop seeker on a (radius, frequency) grid.

    Initial positions sit on the shell of each radius around the source,
    with an aligned frame and quasi-steady filter; each run is repeated
    at the given fractions of the frame period as start-time offsets.
    Containment checks the whole run, entry checks the tail after the
    deadline, and boundedness asks only that nothing diverged.
    """
    deltas = [float(d) for d in deltas]
    omegas = [float(w) for w in omegas]
    if not deltas or not omegas:
        raise ConfigurationError("deltas and omegas must be non-empty")
    if entry_deadline is None:
        entry_deadline = horizon / 2.0
    if not 0.0 < entry_deadline <= horizon:
        raise ConfigurationError("entry_deadline must lie in (0, horizon]")
    dirs = shell_directions()
    p_star = fld.p_star

    runs: list[ProbeRun] = []
    ok1: dict[tuple[float, float], bool] = {}
    ok2: dict[tuple[float, float], bool] = {}
    ok3: dict[tuple[float, float], bool] = {}
    for delta in deltas:
        for w in omegas:
            config = SeekerConfig(omega=w, steps_per_fast_period=steps_per_fast_period)
            frame_period = 2.0 * np.pi / w
            all1 = all2 = all3 = True
            for phase_index, frac in enumerate(phase_fractions):
                t0 = frac * frame_period
                for direction_index in range(dirs.shape[0]):
                    p0 = p_star + delta * dirs[direction_index]
                    run = _probe_single(
                        config, fld, p0, t0, horizon, entry_deadline, eps_x, eps_z,
                        delta, phase_index, direction_index,
                    )
                    runs.append(run)
                    contained = (not run.diverged) and run.sup_dist <= eps_x and run.sup_z <= eps_z
                    entered = (
                        (not run.diverged)
                        and run.entry_time is not None
                        and run.entry_time <= entry_deadline
                        and run.tail_z <= eps_z
                    )
                    all1 = all1 and contained
                    all2 = all2 and entered
                    all3 = all3 and not run.diverged
            ok1[(delta, w)] = all1
            ok2[(delta, w)] = all2
            ok3[(delta, w)] = all3

    def smallest(ok: dict[tuple[float, float], bool]) -> dict[float, float | None]:
        out: dict[float, float | None] = {}
        for delta in deltas:
            passing = [w for w in omegas if ok[(delta, w)]]
            out[delta] = min(passing) if passing else None
        return out

    return StabilityProbeReport(
        eps_x=float(eps_x),
        eps_z=float(eps_z),
        deltas=deltas,
        omegas=omegas,
        horizon=float(horizon),
        entry_deadline=float(entry_deadline),
        runs=runs,
        containment_omega=smallest(ok1),
        entry_omega=smallest(ok2),
        bounded_omega=smallest(ok3),
    )


def _probe_single(
    config: SeekerConfig,
    fld: ScalarField,
    p0: np.ndarray,
    t0: float,
    horizon: float,
    entry_deadline: float,
    eps_x: float,
    eps_z: float,
    delta: float,
    phase_index: int,
    direction_index: int,
) -> ProbeRun:
    try:
        traj = simulate_seeker(
            config, fld, p0, aligned_frame(fld.grad(p0)), horizon, stride=1, t0=t0,
        )
    except DivergenceError:
        return ProbeRun(
            delta=delta, omega=config.omega, phase_index=phase_index,
            direction_index=direction_index, sup_dist=float("inf"),
            sup_z=float("inf"), tail_dist=float("inf"), tail_z=float("inf"),
            entry_time=None, diverged=True,
        )
    rel_times = traj.times - traj.times[0]
    p = traj.states[:, 0:3]
    y = traj.states[:, 12:14]
    dist = np.linalg.norm(p - fld.p_star, axis=1)
    center = np.array([float(fld.c(pk)) for pk in p])
    z = np.linalg.norm(y - np.stack([center, center], axis=1), axis=1)
    tail = rel_times >= entry_deadline
    return ProbeRun(
        delta=delta,
        omega=config.omega,
        phase_index=phase_index,
        direction_index=direction_index,
        sup_dist=float(np.max(dist)),
        sup_z=float(np.max(z)),
        tail_dist=float(np.max(dist[tail])) if np.any(tail) else float("inf"),
        tail_z=float(np.max(z[tail])) if np.any(tail) else float("inf"),
        entry_time=_entry_time(rel_times, dist, eps_x),
        diverged=False,
    )


@dataclass
class AveragedProbeReport:
    """Panel verdicts for the averaged closed loop (frequency-free).

    Tracks entry into a target ball and the height-deficit monotonicity
    along each run.
    """

    deltas: list[float]
    horizon: float
    entry_radius: float
    runs: list[dict]
    all_entered: bool
    max_vc_step_increase: float

    def as_dict(self) -> dict:
        return {
            "deltas": [float(d) for d in self.deltas],
            "horizon": float(self.horizon),
            "entry_radius": float(self.entry_radius),
            "all_entered": bool(self.all_entered),
            "max_vc_step_increase": float(self.max_vc_step_increase),
            "runs": self.runs,
        }


def probe_averaged_stability(
    fld: ScalarField,
    deltas: Sequence[float],
    horizon: float,
    entry_radius: float,
    dt: float = 0.01,
) -> AveragedProbeReport:
    """Run the averaged seeker from shell panels and check convergence.

    Every run starts with an aligned frame; the report carries entry
    times into the target ball, the final gradient norm, and the largest
    single-step increase of the height deficit (which the averaged flow
    should never raise beyond integration noise).
    """
    deltas = [float(d) for d in deltas]
    if not deltas:
        raise ConfigurationError("deltas must be non-empty")
    field = averaged_seeker_field(fld)
    dirs = shell_directions()
    n_steps = max(1, int(round(horizon / dt)))
    grid = TimeGrid(t0=0.0, dt=dt, n_steps=n_steps)

    runs: list[dict] = []
    all_entered = True
    worst_increase = 0.0
    for delta in deltas:
        for direction_index in range(dirs.shape[0]):
            p0 = fld.p_star + delta * dirs[direction_index]
            s0 = np.concatenate([p0, embed(aligned_frame(fld.grad(p0)))])
            times, states = integrate_rk4(field, s0, grid)
            dist = np.linalg.norm(states[:, 0:3] - fld.p_star, axis=1)
            vc = np.array(
                [lyapunov_value_and_rate(fld, s[0:3], s[3:12])[0] for s in states]
            )
            increases = np.diff(vc)
            max_inc = float(np.max(increases)) if increases.size else 0.0
            worst_increase = max(worst_increase, max_inc)
            entry = _entry_time(times, dist, entry_radius)
            if entry is None:
                all_entered = False
            grad_final = float(np.linalg.norm(fld.grad(states[-1, 0:3])))
            runs.append({
                "delta": float(delta),
                "direction_index": direction_index,
                "entry_time": None if entry is None else float(entry),
                "final_dist": float(dist[-1]),
                "final_grad_norm": grad_final,
                "max_vc_step_increase": max_inc,
            })
    return AveragedProbeReport(
        deltas=deltas,
        horizon=float(horizon),
        entry_radius=float(entry_radius),
        runs=runs,
        all_entered=all_entered,
        max_vc_step_increase=worst_increase,
    )
