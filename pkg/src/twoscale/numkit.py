"""Small numerical kernel used by the rest of the package.

Deterministic, fixed-step routines only: matrix exponential, composite
Simpson quadrature on a period (plus its cumulative form), central
finite-difference Jacobians, and a classical RK4 integrator.  Everything
is plain float64; no adaptivity, no hidden state.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConfigurationError, DimensionError, DivergenceError

__all__ = [
    "DEFAULT_FD_STEP",
    "TimeGrid",
    "mat_exp",
    "simpson_rule",
    "quad_periodic",
    "cumulative_simpson",
    "jacobian_fd",
    "rk4_step",
    "integrate_rk4",
]

# cube root of machine epsilon, the usual central-difference step scale
DEFAULT_FD_STEP = float(np.finfo(float).eps) ** (1.0 / 3.0)

_TAYLOR_ORDER = 16


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid t0 + k*dt for k = 0..n_steps.

    Times are computed from the index so long grids do not accumulate
    rounding from repeated addition.
    """

    t0: float
    dt: float
    n_steps: int

    def __post_init__(self) -> None:
        if not np.isfinite(self.t0):
            raise ConfigurationError("TimeGrid t0 must be finite")
        if not (np.isfinite(self.dt) and self.dt > 0.0):
            raise ConfigurationError(f"TimeGrid dt must be positive, got {self.dt}")
        if self.n_steps < 1:
            raise ConfigurationError(f"TimeGrid n_steps must be >= 1, got {self.n_steps}")

    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n_steps + 1)

    @property
    def t_end(self) -> float:
        return self.t0 + self.dt * self.n_steps


def _square_matrix(A: np.ndarray, name: str) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ConfigurationError(f"{name} contains non-finite entries")
    return A


def mat_exp(A: np.ndarray, t: float = 1.0) -> np.ndarray:
    """Matrix exponential exp(t*A) by scaling and squaring.

    The scaled matrix is pushed below unit 1-norm, a degree-16 Taylor
    polynomial is summed, and the result is squared back up.  Accurate to
    well below 1e-12 relative for ||t*A|| up to a few tens, which covers
    every periodic-coefficient problem in this package.
    """
    A = _square_matrix(A, "A")
    B = t * A
    norm = np.linalg.norm(B, 1)
    if norm == 0.0:
        return np.eye(A.shape[0])
    n_squarings = max(0, int(np.ceil(np.log2(norm)))) if norm > 1.0 else 0
    C = B / (2.0**n_squarings)
    E = np.eye(A.shape[0])
    term = np.eye(A.shape[0])
    for k in range(1, _TAYLOR_ORDER + 1):
        term = term @ C / k
        E = E + term
    for _ in range(n_squarings):
        E = E @ E
    return E


def simpson_rule(T: float, n_panels: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of composite Simpson on [0, T].

    n_panels is the subinterval count and must be even (each Simpson
    parabola spans two subintervals).
    """
    if n_panels < 2 or n_panels % 2 != 0:
        raise ConfigurationError(f"n_panels must be even and >= 2, got {n_panels}")
    if not (np.isfinite(T) and T > 0.0):
        raise ConfigurationError(f"period T must be positive, got {T}")
    h = T / n_panels
    nodes = h * np.arange(n_panels + 1)
    weights = np.full(n_panels + 1, 2.0)
    weights[1::2] = 4.0
    weights[0] = weights[-1] = 1.0
    weights *= h / 3.0
    return nodes, weights


def quad_periodic(f: Callable[[float], np.ndarray], T: float, n_panels: int = 256) -> np.ndarray:
    """Integral of a vector-valued function over one period [0, T]."""
    nodes, weights = simpson_rule(T, n_panels)
    f0 = np.atleast_1d(np.asarray(f(nodes[0]), dtype=float))
    acc = weights[0] * f0
    for s, w in zip(nodes[1:], weights[1:]):
        acc = acc + w * np.atleast_1d(np.asarray(f(s), dtype=float))
    return acc


def cumulative_simpson(samples: np.ndarray, dt: float) -> np.ndarray:
    """Running integral of uniformly sampled values, Simpson-based.

    samples has shape (K, ...) with K >= 3; entry k of the result is the
    integral from node 0 to node k.  Even nodes use standard Simpson
    pairs; odd nodes use the half-panel rule through the surrounding
    parabola, so quadratics integrate exactly at every node.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.shape[0] < 3:
        raise ConfigurationError("cumulative_simpson needs at least 3 samples")
    if not (np.isfinite(dt) and dt > 0.0):
        raise ConfigurationError(f"dt must be positive, got {dt}")
    K = samples.shape[0]
    out = np.zeros_like(samples)
    for k in range(1, K):
        if k % 2 == 0:
            out[k] = out[k - 2] + (dt / 3.0) * (
                samples[k - 2] + 4.0 * samples[k - 1] + samples[k]
            )
        elif k + 1 < K:
            out[k] = out[k - 1] + (dt / 12.0) * (
                5.0 * samples[k - 1] + 8.0 * samples[k] - samples[k + 1]
            )
        else:
            # final odd node: parabola through the last three samples
            out[k] = out[k - 1] + (dt / 12.0) * (
                -samples[k - 2] + 8.0 * samples[k - 1] + 5.0 * samples[k]
            )
    return out


def jacobian_fd(
    f: Callable[[np.ndarray], np.ndarray],
    x: np.ndarray,
    h: float | None = None,
) -> np.ndarray:
    """Central-difference Jacobian of f at x, shape (len(f(x)), len(x)).

    The per-coordinate step defaults to cbrt(eps) * (1 + |x_i|).
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.ndim != 1:
        raise DimensionError(f"x must be a vector, got shape {x.shape}")
    f0 = np.atleast_1d(np.asarray(f(x), dtype=float))
    J = np.empty((f0.shape[0], x.shape[0]))
    for i in range(x.shape[0]):
        hi = h if h is not None else DEFAULT_FD_STEP * (1.0 + abs(x[i]))
        xp = x.copy()
        xm = x.copy()
        xp[i] += hi
        xm[i] -= hi
        fp = np.atleast_1d(np.asarray(f(xp), dtype=float))
        fm = np.atleast_1d(np.asarray(f(xm), dtype=float))
        J[:, i] = (fp - fm) / (2.0 * hi)
    return J


def rk4_step(
    field: Callable[[float, np.ndarray], np.ndarray],
    t: float,
    x: np.ndarray,
    dt: float,
) -> np.ndarray:
    """One classical Runge-Kutta step of size dt."""
    k1 = field(t, x)
    k2 = field(t + 0.5 * dt, x + (0.5 * dt) * k1)
    k3 = field(t + 0.5 * dt, x + (0.5 * dt) * k2)
    k4 = field(t + dt, x + dt * k3)
    return x + (dt / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)


def integrate_rk4(
    field: Callable[[float, np.ndarray], np.ndarray],
    x0: np.ndarray,
    grid: TimeGrid,
    post_step: Callable[[np.ndarray], np.ndarray] | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Fixed-step RK4 over the grid; returns (times, states).

    states[k] is the state at times[k]; every step is recorded.
    post_step, when given, is applied to the state after each step
    (constraint projection hooks).  Raises DivergenceError at the first
    non-finite state.
    """
    x = np.atleast_1d(np.asarray(x0, dtype=float)).copy()
    if x.ndim != 1:
        raise DimensionError(f"x0 must be a vector, got shape {x.shape}")
    times = grid.times()
    out = np.empty((grid.n_steps + 1, x.shape[0]))
    out[0] = x
    for k in range(grid.n_steps):
        x = rk4_step(field, times[k], x, grid.dt)
        if post_step is not None:
            x = post_step(x)
        if not np.all(np.isfinite(x)):
            raise DivergenceError(k + 1, float(times[k + 1]))
        out[k + 1] = x
    return times, out
