"""Two-time-scale oscillatory systems with an attracting fast manifold.

The slow state x and fast state y evolve as

    dx/dt = sqrt(w) f1(x, y, w t) + f2(x, y, w t) + f3(...) / sqrt(w)
    dy/dt = w A (y - phi0(x)) + sqrt(w) g1(x, y, w t) + g2(x, y, w t)
            + g3(...) / sqrt(w)

with all oscillatory fields T-periodic in the phase tau = w t, A Hurwitz,
and phi0 the quasi-steady map the fast state tracks.  The standing
assumptions (periodicity, zero phase-average of the sqrt(w)-scale terms,
Hurwitz A) are checked numerically, not taken on faith.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConfigurationError, DimensionError
from .numkit import jacobian_fd, quad_periodic

__all__ = [
    "OscillatorySystemSpec",
    "AssumptionReport",
    "ShiftedState",
    "assemble_full_field",
    "frozen_layer_field",
    "check_assumption_A",
    "to_shifted",
    "from_shifted",
]

PhaseField = Callable[[np.ndarray, np.ndarray, float], np.ndarray]


@dataclass
class OscillatorySystemSpec:
    """Problem data for one two-time-scale system.

    f1, f2, g1, g2 take (x, y, tau) with tau the fast phase; f3 and g3
    are optional remainder terms taking (x, y, tau, omega).  dphi0,
    df1_dy and dg1_dy are optional analytic Jacobians; central
    differences are used when they are absent.
    """

    n: int
    m: int
    T: float
    A: np.ndarray
    phi0: Callable[[np.ndarray], np.ndarray]
    f1: PhaseField
    f2: PhaseField
    g1: PhaseField
    g2: PhaseField
    f3: Callable | None = None
    g3: Callable | None = None
    dphi0: Callable[[np.ndarray], np.ndarray] | None = None
    df1_dy: PhaseField | None = None
    dg1_dy: PhaseField | None = None
    name: str = ""

    def __post_init__(self) -> None:
        if self.n < 1 or self.m < 1:
            raise ConfigurationError(f"state dimensions must be >= 1, got n={self.n}, m={self.m}")
        if not (np.isfinite(self.T) and self.T > 0.0):
            raise ConfigurationError(f"period T must be positive, got {self.T}")
        self.A = np.asarray(self.A, dtype=float)
        if self.A.shape != (self.m, self.m):
            raise DimensionError(f"A must have shape ({self.m}, {self.m}), got {self.A.shape}")
        if not np.all(np.isfinite(self.A)):
            raise ConfigurationError("A contains non-finite entries")

    def pack(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if x.shape != (self.n,) or y.shape != (self.m,):
            raise DimensionError(
                f"expected x shape ({self.n},) and y shape ({self.m},), "
                f"got {x.shape} and {y.shape}"
            )
        return np.concatenate([x, y])

    def unpack(self, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        v = np.asarray(v, dtype=float)
        if v.shape != (self.n + self.m,):
            raise DimensionError(f"state must have shape ({self.n + self.m},), got {v.shape}")
        return v[: self.n], v[self.n :]

    def phi0_jacobian(self, x: np.ndarray) -> np.ndarray:
        """d phi0 / dx, analytic when supplied, else central differences."""
        if self.dphi0 is not None:
            return np.asarray(self.dphi0(x), dtype=float)
        return jacobian_fd(self.phi0, x)


def assemble_full_field(
    spec: OscillatorySystemSpec, omega: float
) -> Callable[[float, np.ndarray], np.ndarray]:
    """Right-hand side of the full system at frequency omega.

    The returned callable maps (t, packed state) to the packed
    derivative, with the fast phase tau = omega * t.
    """
    if not (np.isfinite(omega) and omega > 0.0):
        raise ConfigurationError(f"omega must be positive, got {omega}")
    n = spec.n
    sqrt_w = float(np.sqrt(omega))
    A = spec.A
    f1, f2, g1, g2 = spec.f1, spec.f2, spec.g1, spec.g2
    f3, g3 = spec.f3, spec.g3
    phi0 = spec.phi0

    def field(t: float, v: np.ndarray) -> np.ndarray:
        x = v[:n]
        y = v[n:]
        tau = omega * t
        dx = sqrt_w * f1(x, y, tau) + f2(x, y, tau)
        dy = omega * (A @ (y - phi0(x))) + sqrt_w * g1(x, y, tau) + g2(x, y, tau)
        if f3 is not None:
            dx = dx + f3(x, y, tau, omega) / sqrt_w
        if g3 is not None:
            dy = dy + g3(x, y, tau, omega) / sqrt_w
        return np.concatenate([dx, dy])

    return field


def frozen_layer_field(
    spec: OscillatorySystemSpec, omega: float, x: np.ndarray
) -> Callable[[float, np.ndarray], np.ndarray]:
    """Boundary-layer flow dy/dt = w A (y - phi0(x)) with x frozen."""
    if not (np.isfinite(omega) and omega > 0.0):
        raise ConfigurationError(f"omega must be positive, got {omega}")
    target = np.asarray(spec.phi0(np.asarray(x, dtype=float)), dtype=float)
    A = spec.A

    def field(t: float, y: np.ndarray) -> np.ndarray:
        return omega * (A @ (y - target))

    return field


@dataclass(frozen=True)
class AssumptionReport:
    """Numeric verdicts for the standing assumptions."""

    hurwitz: bool
    spectral_abscissa: float
    zero_mean: bool
    max_mean_defect: float
    periodic: bool
    max_period_defect: float

    @property
    def ok(self) -> bool:
        return self.hurwitz and self.zero_mean and self.periodic


def check_assumption_A(
    spec: OscillatorySystemSpec,
    n_samples: int = 8,
    seed: int = 12345,
    n_panels: int = 256,
    box: float = 2.0,
    mean_tol: float = 1e-8,
    period_tol: float = 1e-10,
) -> AssumptionReport:
    """Check A Hurwitz, f1/g1 phase averages zero, fields T-periodic.

    The average and periodicity checks sample (x, y) from a seeded box;
    they certify the sampled states only, which is the practical reading
    of the for-all quantifiers.
    """
    eigs = np.linalg.eigvals(spec.A)
    abscissa = float(np.max(eigs.real))
    hurwitz = abscissa < 0.0

    rng = np.random.default_rng(seed)
    max_mean = 0.0
    max_period = 0.0
    for _ in range(n_samples):
        x = rng.uniform(-box, box, spec.n)
        y = rng.uniform(-box, box, spec.m)
        for fun in (spec.f1, spec.g1):
            mean = quad_periodic(lambda s: fun(x, y, s), spec.T, n_panels) / spec.T
            max_mean = max(max_mean, float(np.max(np.abs(mean))))
        tau = float(rng.uniform(0.0, spec.T))
        for fun in (spec.f1, spec.f2, spec.g1, spec.g2):
            gap = np.abs(
                np.asarray(fun(x, y, tau + spec.T)) - np.asarray(fun(x, y, tau))
            )
            max_period = max(max_period, float(np.max(gap)))
    return AssumptionReport(
        hurwitz=hurwitz,
        spectral_abscissa=abscissa,
        zero_mean=max_mean < mean_tol,
        max_mean_defect=max_mean,
        periodic=max_period < period_tol,
        max_period_defect=max_period,
    )


@dataclass(frozen=True)
class ShiftedState:
    """State in the corrected coordinates.

    z is the fast deviation after subtracting the quasi-steady map and
    the first two periodic correctors; tau is the fast phase and
    eps = 1/sqrt(omega) the perturbation scale, meaningful only in the
    high-frequency regime eps <= 1.
    """

    x: np.ndarray
    z: np.ndarray
    tau: float
    eps: float

    def __post_init__(self) -> None:
        if not (0.0 < self.eps <= 1.0):
            raise ConfigurationError(
                f"eps must lie in (0, 1] (omega >= 1), got {self.eps}"
            )


def _corrector_terms(
    spec: OscillatorySystemSpec,
    x: np.ndarray,
    tau: float,
    eps: float,
    phi1: Callable[[np.ndarray, float], np.ndarray] | None,
    phi2: Callable[[np.ndarray, float], np.ndarray] | None,
) -> np.ndarray:
    shift = np.asarray(spec.phi0(x), dtype=float).copy()
    if phi1 is not None:
        shift += eps * np.asarray(phi1(x, tau), dtype=float)
    if phi2 is not None:
        shift += eps * eps * np.asarray(phi2(x, tau), dtype=float)
    return shift


def to_shifted(
    spec: OscillatorySystemSpec,
    x: np.ndarray,
    y: np.ndarray,
    t: float,
    omega: float,
    phi1: Callable[[np.ndarray, float], np.ndarray] | None = None,
    phi2: Callable[[np.ndarray, float], np.ndarray] | None = None,
    t0: float = 0.0,
) -> ShiftedState:
    """Subtract the quasi-steady map and correctors from the fast state."""
    if not (np.isfinite(omega) and omega > 0.0):
        raise ConfigurationError(f"omega must be positive, got {omega}")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    eps = 1.0 / float(np.sqrt(omega))
    tau = omega * (t - t0)
    z = y - _corrector_terms(spec, x, tau, eps, phi1, phi2)
    return ShiftedState(x=x.copy(), z=z, tau=float(tau), eps=eps)


def from_shifted(
    spec: OscillatorySystemSpec,
    state: ShiftedState,
    phi1: Callable[[np.ndarray, float], np.ndarray] | None = None,
    phi2: Callable[[np.ndarray, float], np.ndarray] | None = None,
    t0: float = 0.0,
) -> tuple[np.ndarray, np.ndarray, float]:
    """Invert to_shifted; returns (x, y, t)."""
    omega = 1.0 / (state.eps * state.eps)
    y = state.z + _corrector_terms(spec, state.x, state.tau, state.eps, phi1, phi2)
    t = t0 + state.tau / omega
    return state.x.copy(), y, t
