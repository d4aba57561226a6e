"""Second-order attainability certificates for symmetric control systems."""

from .analysis import (
    ConsistencyError,
    QuadraticFormValue,
    SecondOrderData,
    build_K,
    build_S,
    lie_bracket,
    quad_form,
    second_hamiltonian,
    second_order_data,
    split_S,
)
from .catalog import CATALOG_NAMES, UnknownCatalogEntry, catalog_lookup, catalog_text
from .derivatives import DerivativeOracle, grad_u, hess_u, jac_sigma_col, sigma_jacobian
from .expr import ExpressionError, ParseError, parse_expression, to_source
from .spectral import (
    AttainabilityCertificate,
    EigenDecomposition,
    Kind,
    TOL_EIG,
    ZeroGradientError,
    classify,
    eigh,
    petrov_check,
    synthesize_from_K,
    synthesize_from_S,
    tol_petrov,
    tol_sym,
)
from .studies import (
    ConvergenceStudy,
    MinTimeProbe,
    bch_gap_residual,
    bch_gap_study,
    bracket_realization_residual,
    bracket_realization_study,
    default_t_values,
    min_time_probe,
    one_switch_expansion_study,
    prop1_residual,
    prop2_residual,
    prop3_decay_study,
    u_expansion_study,
)
from .systems import (
    ConfigError,
    ControlSystem,
    EvaluationError,
    LoadedConfig,
    TargetFunction,
    load_config,
    parse_config,
    validate_control,
)
from .trajectories import (
    IntegrationBlowup,
    SwitchSchedule,
    TrajectoryRecord,
    averaged_endpoint,
    certificate_schedule,
    integrate,
    integrate_endpoint,
    one_switch_endpoint,
    three_switch_bracket_endpoint,
    write_trajectory_csv,
)

__version__ = "0.1.0"
