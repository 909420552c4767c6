"""Numerical laboratory for drift/volatility-controlled commodity price models.

Three linear-quadratic market models (producer-only drift+volatility control,
producer drift plus information-based volatility control, and a producer vs
trader game), their Riccati/linear coefficient systems, optimal feedback
policies, arbitrage-free pricing of the squared-price claim, seeded Monte
Carlo, and independent verification oracles.
"""

__version__ = "0.1.0"

from .params import (
    AdmissibilityReport,
    ConfigError,
    ModelKind,
    ModelParams,
    ParamError,
    admissibility_report,
    lambda_threshold,
    load_config,
    parse_config,
    q_star,
    require_admissible,
    t_max,
    theta,
)
from .ode import (
    CoefficientTable,
    DivergenceError,
    GridError,
    OdeSystem,
    TimeGrid,
    integrate_backward,
    tail_integral_trapezoid,
)
from .coeffs import (
    Model1Coeffs,
    Model2Coeffs,
    Model3Coeffs,
    SingularityError,
    build_coeffs,
    default_grid,
    model1_D_closed,
    model1_coeffs,
    model2_coeffs,
    model3_coeffs,
    price_tail,
)
from .policy import (
    AdmissibilityError,
    GridAdmissibility,
    PolicyEval,
    check_admissible,
    control,
    control_model1,
    control_model2,
    control_model3,
    z_profile,
)
from .simulate import (
    MeanCI,
    Measure,
    PathEnsemble,
    SimConfig,
    estimate,
    exact_q_model1,
    paths_csv_text,
    simulate,
)
from .pricing import (
    PriceReport,
    default_lambda_grid,
    h0_no_manip,
    hedge_delta,
    price_h,
    sweep_lambda,
    sweep_power_cost,
    value_functions,
)
from .verify import (
    CrossSimReport,
    Perturbation,
    PerturbationReport,
    ResidualReport,
    cross_simulator_check,
    hjb_residual,
    perturbation_test,
)
