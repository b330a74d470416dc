"""Discrete double-phase singular problems driven by fractional derivatives.

Builds fractional integral and derivative operators with a configurable
coordinate weight on interval and square grids, evaluates the associated
double-phase energy with a singular
absorption term, analyzes its ray geometry (the two-root constraint-class
structure), and locates two weak solutions of opposite energy sign for small
coupling.
"""

from .config import DEFAULT_CONFIG, RunConfig, load_config
from .domain import (
    ClauseCheck,
    Field,
    GridSpec,
    ProblemParams,
    PsiFunction,
    ValidationReport,
    coefficient_from_name,
    exp_psi,
    identity_psi,
    integrate,
    power_psi,
    psi_from_name,
    read_field_csv,
    validate_params,
    weighted_power_integral,
    write_field_csv,
)
from .energy import (
    EnergyBreakdown,
    apply_A,
    energy,
    energy_from_bundle,
    energy_gradient,
    singular_floor,
    weak_residual,
)
from .errors import (
    BoundaryMaskError,
    ConfigError,
    DegenerateDirectionError,
    DomainError,
    InvalidOrderError,
    InvalidPsiError,
    LambdaTooLargeError,
    NegativeCandidateError,
    NoTwoRootStructureError,
    NonFiniteFieldError,
    NumericalBreakdownError,
    PsinehariError,
    ShapeError,
    TwoSolutionFailure,
    UnknownQuantityError,
    ZeroFieldError,
)
from .fracops import (
    FracOperator,
    OperatorSet,
    adjoint_apply,
    apply,
    assemble_hilfer_derivative,
    assemble_rl_integral,
    build_operator_set,
    first_derivative_matrix,
    mixed_adjoint_apply,
    mixed_apply,
    operator_to_csv,
)
from .nehari import (
    N_MINUS,
    N_PLUS,
    N_ZERO,
    OFF_MANIFOLD,
    FiberReport,
    NehariClass,
    NehariTolerances,
    classify,
    classify_bundle,
    eta_h,
    fiber_w,
    fiber_w1,
    fiber_w2,
    find_roots,
    phi,
    phi_hat,
    phi_hat_max_closed_form,
    t_hat0,
)
from .oracle import (
    OracleConfig,
    dense_reference,
    fd_derivative,
    registered_quantities,
    scan_argmax,
)
from .solver import (
    SolveResult,
    SolverOptions,
    coercivity_probe,
    default_initial_field,
    estimate_lambda_star,
    estimate_sobolev_constant,
    lambda_sweep,
    minimize_on_branch,
    smooth_bump_field,
    test_direction_basis,
    two_solution_solve,
)
from .spaces import NormBundle, luxemburg_norm, modular, norm_bundle

__version__ = "0.1.0"
