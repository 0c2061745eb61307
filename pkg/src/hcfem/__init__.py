"""High-contrast diffusion toolkit.

Form pairs with a distinguished subspace, Laurent-expansion solves of
singularly perturbed systems (S1 + eps*S2) xi = eta with certified
truncation bounds, P1 finite-element assembly of piecewise-coefficient
diffusion problems, and asymptotic-limit preconditioners benchmarked in a
PCG harness.
"""

from .errors import (
    AssumptionCheckFailed,
    AssumptionsViolated,
    BreakdownNonSPD,
    CoefficientBelowFloor,
    ConfigInvalid,
    DimensionMismatch,
    ExperimentFailed,
    ExpressionError,
    FunctionalNotInKernel,
    HcfemError,
    InvalidDimensions,
    MisalignedGeometry,
    NoConvergence,
    NonPositiveCoefficient,
    NotPositiveDefinite,
    SolverFailure,
)
from .linalg import (
    Basis,
    CGResult,
    CholeskyFactor,
    SymMatrix,
    cg_solve,
    cholesky,
    extremal_eigs,
    orthonormal_complement,
    read_matrix_market,
    write_matrix_market,
)
from .forms import (
    AssumptionReport,
    FormPair,
    check_assumptions,
    load_form_pair,
    quadratic_functional,
    random_form_pair,
    save_form_pair,
)
from .expansion import (
    ErrorTable,
    ExpansionResult,
    constrained_solve,
    expansion_error_sweep,
    laurent_coefficients,
    solve_direct,
    subspace_solve,
)
from .diffusion import (
    DiffusivitySpec,
    GeometryConfig,
    Mesh,
    assemble_forms,
    assemble_operator,
    build_mesh,
    epsilon_system,
    exact_1d_two_material,
    flux,
    load_vector,
    monotone_experiment,
)
from .precond import (
    BenchReport,
    Preconditioner,
    build_expansion_preconditioner,
    build_frozen_limit_preconditioner,
    identity_preconditioner,
    l1_coefficient_distance,
    operator_deviation,
    pcg_benchmark,
)
from .expr import Expression, parse_expression
from .oracle import OracleReport, run_oracle_suite
from .svg import emit_svg_loglog

__version__ = "0.1.0"
