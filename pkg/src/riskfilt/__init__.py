"""Gaussian filtering with exponential-quadratic (LEG and risk-sensitive) criteria."""

from .cameron_martin import conditional_laplace_rhs, gain_matrix_G, optimal_risk
from .errors import (Blowup, ConditionViolated, NegativeDiagonal, NonFinite,
                     NonPositiveDefinite, RiskFiltError, SingularPhi1, ValidationError,
                     ZeroLambda22)
from .filters import (FilterGains, apply_filter, extract_kernel, kalman_filter, leg_gains,
                      risk_neutral_gains, risk_neutral_h, rs_gains)
from .model import (CovarianceSpec, ModelSpec, SymMat2, TimeGrid, TriKernel, ValidatedModel,
                    ou_covariance, transition_Pi, validate_model)
from .montecarlo import mc_cameron_martin, mc_compare, path_cost, simulate_paths
from .riccati import (check_conditions, solve_backward_Gamma, solve_backward_linearized,
                      solve_forward_gamma)
from .volterra import rs_filter_general, solve_riccati_volterra, solve_Z_volterra

__version__ = "0.1.0"
