"""Numerics for two-time-scale oscillatory systems.

The package builds reduced and averaged models of fast-oscillatory
systems with an attracting fast manifold (periodic correctors, bracket
averaging), applies them to a 3D dithered source-seeking vehicle, and
ships a verification harness plus a command line for the standard
checks.
"""

from .averaging import (
    AveragedSystem,
    CorrectorSolution,
    ReducedAveragedBundle,
    ReducedSystem,
    average,
    build_b,
    build_bundle,
    build_reduced,
    residual_bvp,
    solve_periodic_bvp,
)
from .errors import (
    ConfigurationError,
    DimensionError,
    DivergenceError,
    ManifoldError,
    TwoscaleError,
)
from .harness import (
    RunRecord,
    StabilityProbeReport,
    SweepReport,
    aligned_frame,
    fit_boundary_layer,
    probe_averaged_stability,
    probe_seeker_stability,
    run_compare,
    sweep_convergence,
)
from .numkit import (
    TimeGrid,
    cumulative_simpson,
    integrate_rk4,
    jacobian_fd,
    mat_exp,
    quad_periodic,
    rk4_step,
)
from .seeker import (
    ScalarField,
    SeekerConfig,
    as_system_spec,
    averaged_seeker_field,
    builtin_fields,
    cross_check,
    lyapunov_value_and_rate,
    raw_kinematics_field,
    seeker_field,
    sensor_position,
    simulate_seeker,
)
from .so3 import embed, exp_so3, extract, hat, manifold_residual, project_so3
from .system import (
    OscillatorySystemSpec,
    ShiftedState,
    assemble_full_field,
    check_assumption_A,
    from_shifted,
    to_shifted,
)

__version__ = "0.1.0"
