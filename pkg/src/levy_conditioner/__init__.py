"""Harmonic functions and conditioned dynamics for recurrent
one-dimensional Levy processes.

The package computes the renormalized zero resolvent h, hitting
probabilities of finite sets, the harmonic functions phi that condition
the process to avoid points, bounded sets and lattices, and verifies the
associated clock limits and h-transform dynamics numerically.
"""
from . import errors
from ._paths import MCConfig
from .conditioned_sim import (
    ClockLimitTable,
    ClockSpec,
    PathEnsemble,
    martingale_check,
    rejection_estimator,
    simulate_conditioned,
    transience_diagnostic,
    verify_clock_limit,
)
from .harmonic import (
    AvoidSet,
    BoundedSetEstimate,
    HarmonicFn,
    closed_form_oracle,
    lattice_R_q,
    phi_bounded_set,
    phi_lattice,
    phi_n_points,
    phi_two_points,
)
from .hitting import (
    HittingSolution,
    PointSet,
    finite_set_hitting_limit,
    finite_set_laplace,
    green_normalizers,
    killed_resolvent,
    local_time_normalizer,
    one_point_laplace,
)
from .levy_model import (
    AdmissibilityReport,
    LevyModel,
    check_condition_A,
    check_lattice_condition,
    sample_increments,
    tail_order,
    validate_model,
)
from .quadrature import DEFAULT_QUADRATURE, QuadratureConfig
from .resolvent import (
    ResolventValue,
    clear_caches,
    h,
    h_gamma,
    h_q,
    qr0_limit_check,
    resolvent_density,
)

__version__ = "0.1.0"

__all__ = [
    "AdmissibilityReport",
    "AvoidSet",
    "BoundedSetEstimate",
    "ClockLimitTable",
    "ClockSpec",
    "DEFAULT_QUADRATURE",
    "HarmonicFn",
    "HittingSolution",
    "LevyModel",
    "MCConfig",
    "PathEnsemble",
    "PointSet",
    "QuadratureConfig",
    "ResolventValue",
    "check_condition_A",
    "check_lattice_condition",
    "clear_caches",
    "closed_form_oracle",
    "errors",
    "finite_set_hitting_limit",
    "finite_set_laplace",
    "green_normalizers",
    "h",
    "h_gamma",
    "h_q",
    "killed_resolvent",
    "lattice_R_q",
    "local_time_normalizer",
    "martingale_check",
    "one_point_laplace",
    "phi_bounded_set",
    "phi_lattice",
    "phi_n_points",
    "phi_two_points",
    "qr0_limit_check",
    "rejection_estimator",
    "resolvent_density",
    "sample_increments",
    "simulate_conditioned",
    "tail_order",
    "transience_diagnostic",
    "validate_model",
    "verify_clock_limit",
    "__version__",
]
