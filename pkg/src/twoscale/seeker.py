"""Bio-inspired 3D source seeking with a dithered rigid body.

A vehicle with position p and attitude R carries one scalar sensor,
offset from the center along the second body axis.  It surges along its
first body axis with a fast dither whose phase is modulated by the
sensor reading, rolls about that axis at the fast rate, and steers with
a band-pass filtered copy of the reading.  On average the vehicle turns
its surge axis up the gradient of the sensed field and ascends it.

Two representations are implemented: the raw kinematics (p, R, y) and
the rotating-frame representation (p, Q, y) with R = Q R0(tau),
R0(tau) = exp_so3(tau e1), which removes the fast roll.  Both are
integrated exactly; a cross-check pins their equivalence.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigurationError, DimensionError, ManifoldError
from .numkit import TimeGrid, integrate_rk4, jacobian_fd
from .so3 import cross3, embed, exp_so3, extract, manifold_residual, project_so3
from .system import OscillatorySystemSpec

__all__ = [
    "ScalarField",
    "SeekerConfig",
    "builtin_fields",
    "sensor_position",
    "initial_state",
    "seeker_field",
    "raw_kinematics_field",
    "cross_check",
    "simulate_seeker",
    "SeekerTrajectory",
    "averaged_seeker_field",
    "lyapunov_value_and_rate",
    "as_system_spec",
    "FILTER_A",
    "FILTER_B",
    "FILTER_C",
]

# band-pass filter realization: dy = w (A y + B u), output C y
FILTER_A = np.array([[-1.0, 1.0], [0.0, -1.0]])
FILTER_B = np.array([0.0, 1.0])
FILTER_C = np.array([-1.0, 1.0])

_E1 = np.array([1.0, 0.0, 0.0])

STATE_DIM = 14  # p (3) + frame columns (9) + filter (2)


@dataclass(frozen=True)
class ScalarField:
    """Sensed scalar field with its critical point and derivatives.

    kappa, when set, is a global quadratic-growth constant:
    c(p_star) - c(p) <= kappa * ||grad c(p)||^2 everywhere.  None means
    no such bound holds (fields with saturating tails).
    """

    name: str
    c: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    p_star: np.ndarray
    hess: Callable[[np.ndarray], np.ndarray] | None = None
    kappa: float | None = None

    def hessian(self, p: np.ndarray) -> np.ndarray:
        if self.hess is not None:
            return np.asarray(self.hess(p), dtype=float)
        return jacobian_fd(self.grad, p)


def builtin_fields() -> dict[str, ScalarField]:
    """The two reference fields used across the test problems."""

    def log_c(p: np.ndarray) -> float:
        return -float(np.log1p(0.5 * float(p @ p)))

    def log_grad(p: np.ndarray) -> np.ndarray:
        return -p / (1.0 + 0.5 * float(p @ p))

    def log_hess(p: np.ndarray) -> np.ndarray:
        s = 1.0 + 0.5 * float(p @ p)
        return -np.eye(3) / s + np.outer(p, p) / (s * s)

    def quad_c(p: np.ndarray) -> float:
        return -0.5 * float(p @ p)

    def quad_grad(p: np.ndarray) -> np.ndarray:
        return -p

    def quad_hess(p: np.ndarray) -> np.ndarray:
        return -np.eye(3)

    return {
        "log": ScalarField(
            name="log",
            c=log_c,
            grad=log_grad,
            hess=log_hess,
            p_star=np.zeros(3),
            kappa=None,
        ),
        "quadratic": ScalarField(
            name="quadratic",
            c=quad_c,
            grad=quad_grad,
            hess=quad_hess,
            p_star=np.zeros(3),
            kappa=0.5,
        ),
    }


@dataclass(frozen=True)
class SeekerConfig:
    """Simulation parameters for the closed-loop seeker.

    The sensor offset and dither amplitude are tied to omega
    (radius 1/sqrt(omega), speed amplitude sqrt(4 omega)); only the
    frequency, step resolution, projection switch, and filter start are
    free.  steps_per_fast_period counts RK4 steps per dither period
    pi/omega, the fastest scale in the loop.
    """

    omega: float
    steps_per_fast_period: int = 200
    projection: bool = True
    y0_mode: str = "quasi-steady"

    def __post_init__(self) -> None:
        if not (np.isfinite(self.omega) and self.omega > 0.0):
            raise ConfigurationError(f"omega must be positive, got {self.omega}")
        if self.steps_per_fast_period < 2:
            raise ConfigurationError(
                f"steps_per_fast_period must be >= 2, got {self.steps_per_fast_period}"
            )
        if self.y0_mode not in ("quasi-steady", "zero"):
            raise ConfigurationError(
                f"y0_mode must be 'quasi-steady' or 'zero', got {self.y0_mode!r}"
            )

    @property
    def eps(self) -> float:
        return 1.0 / float(np.sqrt(self.omega))

    @property
    def sensor_radius(self) -> float:
        return self.eps

    @property
    def dt(self) -> float:
        return (np.pi / self.omega) / self.steps_per_fast_period


def sensor_position(p: np.ndarray, q: np.ndarray, tau: float, radius: float) -> np.ndarray:
    """World position of the sensor in the rotating-frame representation."""
    q = np.asarray(q, dtype=float)
    if q.shape != (9,):
        raise DimensionError(f"q must have shape (9,), got {q.shape}")
    return np.asarray(p, dtype=float) + radius * (
        np.cos(tau) * q[3:6] + np.sin(tau) * q[6:9]
    )


def initial_state(
    config: SeekerConfig,
    fld: ScalarField,
    p0: np.ndarray,
    R0: np.ndarray,
    y0: Sequence[float] | None = None,
) -> np.ndarray:
    """Packed initial state; the filter starts quasi-steady unless told not to.

    Quasi-steady means y = -A^{-1} B c(p0) = (c(p0), c(p0)), which removes
    the initial fast transient.  y0, when given, overrides the mode.
    """
    p0 = np.asarray(p0, dtype=float)
    if p0.shape != (3,):
        raise DimensionError(f"p0 must have shape (3,), got {p0.shape}")
    R0 = np.asarray(R0, dtype=float)
    res = manifold_residual(embed(R0))
    if not res < 1e-6:
        raise ManifoldError(f"R0 is not a rotation (residual {res:.3g})")
    if y0 is not None:
        y = np.asarray(y0, dtype=float)
        if y.shape != (2,):
            raise DimensionError(f"y0 must have shape (2,), got {y.shape}")
    elif config.y0_mode == "zero":
        y = np.zeros(2)
    else:
        c0 = float(fld.c(p0))
        y = np.array([c0, c0])
    return np.concatenate([p0, embed(R0), y])


def seeker_field(
    config: SeekerConfig, fld: ScalarField
) -> Callable[[float, np.ndarray], np.ndarray]:
    """Closed-loop right-hand side in the rotating-frame representation.

    State layout: p (3), frame columns q (9), filter y (2).  The roll is
    absorbed into the frame R0(tau) = exp_so3(tau e1); what remains of
    the steering is the filtered reading times the rotated third axis.
    """
    w = config.omega
    sqw = float(np.sqrt(w))
    radius = config.sensor_radius
    amp = 2.0 * sqw
    c = fld.c

    def rhs(t: float, s: np.ndarray) -> np.ndarray:
        p = s[0:3]
        q1 = s[3:6]
        q2 = s[6:9]
        q3 = s[9:12]
        y = s[12:14]
        tau = w * t
        ct = np.cos(tau)
        st = np.sin(tau)
        ps = p + radius * (ct * q2 + st * q3)
        val = float(c(ps))

        dp = (amp * np.cos(2.0 * tau - val)) * q1

        axis = exp_so3(tau * _E1) @ np.array([0.0, 0.0, 1.0])
        wv = axis[0] * q1 + axis[1] * q2 + axis[2] * q3
        gain = sqw * (y[1] - y[0])
        dq1 = gain * cross3(wv, q1)
        dq2 = gain * cross3(wv, q2)
        dq3 = gain * cross3(wv, q3)

        dy0 = w * (y[1] - y[0])
        dy1 = w * (val - y[1])
        return np.concatenate([dp, dq1, dq2, dq3, [dy0, dy1]])

    return rhs


def raw_kinematics_field(
    config: SeekerConfig, fld: ScalarField
) -> Callable[[float, np.ndarray], np.ndarray]:
    """Closed-loop right-hand side for the raw vehicle (p, R, y).

    The vehicle surges along its first body axis with the dithered
    speed, rolls about it at rate omega, and steers about the third body
    axis with the filtered reading.  The sensor rides the second body
    axis.
    """
    w = config.omega
    sqw = float(np.sqrt(w))
    radius = config.sensor_radius
    amp = 2.0 * sqw
    c = fld.c

    def rhs(t: float, s: np.ndarray) -> np.ndarray:
        p = s[0:3]
        r1 = s[3:6]
        r2 = s[6:9]
        r3 = s[9:12]
        y = s[12:14]
        ps = p + radius * r2
        val = float(c(ps))

        dp = (amp * np.cos(2.0 * w * t - val)) * r1

        # body angular velocity w e1 + sqrt(w) (C y) e3, in world coords
        omega_world = w * r1 + (sqw * (y[1] - y[0])) * r3
        dr1 = cross3(omega_world, r1)
        dr2 = cross3(omega_world, r2)
        dr3 = cross3(omega_world, r3)

        dy0 = w * (y[1] - y[0])
        dy1 = w * (val - y[1])
        return np.concatenate([dp, dr1, dr2, dr3, [dy0, dy1]])

    return rhs


def cross_check(
    config: SeekerConfig,
    fld: ScalarField,
    p0: np.ndarray,
    R0: np.ndarray,
    n_frame_periods: int = 1,
    steps_per_fast_period: int = 400,
) -> float:
    """Worst disagreement between the raw and rotating representations.

    Both start from the same physical state (the rotating frame equals R
    at t = 0) and integrate unprojected over whole frame periods
    2 pi / omega; the raw attitude is compared against Q exp_so3(w t e1)
    step by step.  Agreement at the integrator's accuracy level
    certifies that the two right-hand sides describe the same vehicle.
    """
    if n_frame_periods < 1:
        raise ConfigurationError(f"n_frame_periods must be >= 1, got {n_frame_periods}")
    w = config.omega
    s0 = initial_state(config, fld, p0, R0)
    dt = (np.pi / w) / steps_per_fast_period
    n_steps = 2 * steps_per_fast_period * n_frame_periods
    grid = TimeGrid(t0=0.0, dt=dt, n_steps=n_steps)

    times, raw = integrate_rk4(raw_kinematics_field(config, fld), s0, grid)
    _, rot = integrate_rk4(seeker_field(config, fld), s0, grid)

    dev = 0.0
    for k in range(n_steps + 1):
        t = times[k]
        dev = max(dev, float(np.max(np.abs(raw[k, 0:3] - rot[k, 0:3]))))
        dev = max(dev, float(np.max(np.abs(raw[k, 12:14] - rot[k, 12:14]))))
        Q = extract(rot[k, 3:12], tol=None)
        R_pred = Q @ exp_so3((w * t) * _E1)
        R_raw = extract(raw[k, 3:12], tol=None)
        dev = max(dev, float(np.max(np.abs(R_raw - R_pred))))
    return dev


@dataclass(frozen=True)
class SeekerTrajectory:
    """Recorded rotating-frame run: times (K,), states (K, 14)."""

    times: np.ndarray
    states: np.ndarray
    omega: float
    field_name: str

    def center_values(self, fld: ScalarField) -> np.ndarray:
        return np.array([float(fld.c(s[0:3])) for s in self.states])

    def frame_residuals(self) -> np.ndarray:
        return np.array([manifold_residual(s[3:12]) for s in self.states])

    def lyapunov_values(self, fld: ScalarField) -> np.ndarray:
        c_star = float(fld.c(fld.p_star))
        return np.array([c_star - float(fld.c(s[0:3])) for s in self.states])


def _project_state(s: np.ndarray) -> np.ndarray:
    out = s.copy()
    Q = out[3:12].reshape(3, 3).T
    out[3:12] = embed(project_so3(Q))
    return out


def simulate_seeker(
    config: SeekerConfig,
    fld: ScalarField,
    p0: np.ndarray,
    R0: np.ndarray,
    t_f: float,
    y0: Sequence[float] | None = None,
    stride: int = 1,
    t0: float = 0.0,
) -> SeekerTrajectory:
    """Integrate the rotating-frame seeker over [t0, t0 + t_f].

    The step is pi/omega divided by steps_per_fast_period; the frame is
    projected back onto the rotation constraint after every step when
    projection is enabled.  stride thins the recording (the final state
    is always kept).  t0 sets the dither phase at the start.
    """
    if not (np.isfinite(t_f) and t_f > 0.0):
        raise ConfigurationError(f"t_f must be positive, got {t_f}")
    if stride < 1:
        raise ConfigurationError(f"stride must be >= 1, got {stride}")
    s0 = initial_state(config, fld, p0, R0, y0=y0)
    dt = config.dt
    n_steps = max(1, int(round(t_f / dt)))
    grid = TimeGrid(t0=float(t0), dt=dt, n_steps=n_steps)
    post = _project_state if config.projection else None
    times, states = integrate_rk4(seeker_field(config, fld), s0, grid, post_step=post)
    keep = np.arange(0, n_steps + 1, stride)
    if keep[-1] != n_steps:
        keep = np.append(keep, n_steps)
    return SeekerTrajectory(
        times=times[keep], states=states[keep], omega=config.omega, field_name=fld.name
    )


def averaged_seeker_field(fld: ScalarField) -> Callable[[float, np.ndarray], np.ndarray]:
    """Averaged closed loop on (p, q): ascend along the surge axis,
    turn the surge axis toward the gradient at a quarter rate.

    dp = (q1 . grad c) q1, and the frame rotates with world angular
    velocity (-u3 q2 + u2 q3) / 4 where ui = qi . grad c; equivalently
    dQ = Q hat(e1 x Q^T grad c) / 4.  The time argument is ignored (the
    average is autonomous).
    """
    grad = fld.grad

    def rhs(t: float, s: np.ndarray) -> np.ndarray:
        p = s[0:3]
        q1 = s[3:6]
        q2 = s[6:9]
        q3 = s[9:12]
        g = grad(p)
        u1 = float(q1 @ g)
        u2 = float(q2 @ g)
        u3 = float(q3 @ g)
        dp = u1 * q1
        wbar = 0.25 * (u2 * q3 - u3 * q2)
        dq1 = cross3(wbar, q1)
        dq2 = cross3(wbar, q2)
        dq3 = cross3(wbar, q3)
        return np.concatenate([dp, dq1, dq2, dq3])

    return rhs


def lyapunov_value_and_rate(
    fld: ScalarField, p: np.ndarray, q: np.ndarray
) -> tuple[float, float]:
    """Height deficit V = c(p_star) - c(p) and its averaged-flow rate.

    Along the averaged closed loop, dV/dt = -(q1 . grad c)^2 <= 0.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if q.shape != (9,):
        raise DimensionError(f"q must have shape (9,), got {q.shape}")
    value = float(fld.c(fld.p_star)) - float(fld.c(p))
    u1 = float(q[0:3] @ np.asarray(fld.grad(p), dtype=float))
    return value, -u1 * u1


def as_system_spec(fld: ScalarField) -> OscillatorySystemSpec:
    """The seeker as a two-time-scale system on x = (p, q), y = filter.

    The slow state is the 12-vector (p, frame columns); the fast state is
    the filter pair.  The decomposition lives in the dither phase tau and
    is frequency-free: the sensor offset enters only through the Taylor
    split of the reading around the center value, which is what the
    sqrt-scale and order-one slow/fast fields below encode.
    """
    grad = fld.grad
    c = fld.c

    def phi0(x: np.ndarray) -> np.ndarray:
        val = float(c(x[0:3]))
        return np.array([val, val])

    def dphi0(x: np.ndarray) -> np.ndarray:
        g = np.asarray(grad(x[0:3]), dtype=float)
        out = np.zeros((2, 12))
        out[0, 0:3] = g
        out[1, 0:3] = g
        return out

    def f1(x: np.ndarray, y: np.ndarray, tau: float) -> np.ndarray:
        p = x[0:3]
        q1 = x[3:6]
        q2 = x[6:9]
        q3 = x[9:12]
        ct = np.cos(tau)
        st = np.sin(tau)
        out = np.empty(12)
        out[0:3] = (2.0 * np.cos(2.0 * tau - float(c(p)))) * q1
        wv = ct * q3 - st * q2
        gain = y[1] - y[0]
        out[3:6] = gain * cross3(wv, q1)
        out[6:9] = gain * cross3(wv, q2)
        out[9:12] = gain * cross3(wv, q3)
        return out

    def df1_dy(x: np.ndarray, y: np.ndarray, tau: float) -> np.ndarray:
        q1 = x[3:6]
        q2 = x[6:9]
        q3 = x[9:12]
        ct = np.cos(tau)
        st = np.sin(tau)
        wv = ct * q3 - st * q2
        out = np.zeros((12, 2))
        for i, qi in enumerate((q1, q2, q3)):
            cr = cross3(wv, qi)
            out[3 + 3 * i : 6 + 3 * i, 0] = -cr
            out[3 + 3 * i : 6 + 3 * i, 1] = cr
        return out

    def f2(x: np.ndarray, y: np.ndarray, tau: float) -> np.ndarray:
        p = x[0:3]
        q1 = x[3:6]
        q2 = x[6:9]
        q3 = x[9:12]
        g = np.asarray(grad(p), dtype=float)
        d = np.cos(tau) * q2 + np.sin(tau) * q3
        out = np.zeros(12)
        out[0:3] = (2.0 * float(g @ d) * np.sin(2.0 * tau - float(c(p)))) * q1
        return out

    def g1(x: np.ndarray, y: np.ndarray, tau: float) -> np.ndarray:
        p = x[0:3]
        q2 = x[6:9]
        q3 = x[9:12]
        g = np.asarray(grad(p), dtype=float)
        d = np.cos(tau) * q2 + np.sin(tau) * q3
        return FILTER_B * float(g @ d)

    def g2(x: np.ndarray, y: np.ndarray, tau: float) -> np.ndarray:
        p = x[0:3]
        q2 = x[6:9]
        q3 = x[9:12]
        H = fld.hessian(p)
        d = np.cos(tau) * q2 + np.sin(tau) * q3
        return FILTER_B * (0.5 * float(d @ (H @ d)))

    def dg1_dy(x: np.ndarray, y: np.ndarray, tau: float) -> np.ndarray:
        return np.zeros((2, 2))

    return OscillatorySystemSpec(
        n=12,
        m=2,
        T=2.0 * np.pi,
        A=FILTER_A.copy(),
        phi0=phi0,
        f1=f1,
        f2=f2,
        g1=g1,
        g2=g2,
        dphi0=dphi0,
        df1_dy=df1_dy,
        dg1_dy=dg1_dy,
        name=f"seeker-{fld.name}",
    )
