"""Modes of Gaussian measures and posteriors: small-ball probabilities,
Onsager-Machlup MAP estimation and finite-radius mode classification."""

__version__ = "0.1.0"

from .exceptions import (ContractError, NumericalWarning, PotentialEvaluationError,
                         UndefinedRatioError)
from .measure import (AnalyticMeasure1D, Ball, SpectralGaussian, cm_inner, cm_norm_sq,
                      cm_shift_density, exact_ball_prob_1d, log_cm_shift_density,
                      rkhs_coefficients, sample)
from .modes import (RadiusSchedule, amf_track, classify_generalized, classify_mode,
                    classify_strong, classify_weak, dichotomy_check, estimate_Mr,
                    m_property_decay)
from .om_solver import Posterior, minimize_om, om_gradient, om_ratio_prediction, om_value
from .potential import (Potential, cubic_misfit, nonlinear_misfit, quadratic_misfit,
                        unbounded_below_example, verify_bound, verify_coercivity)
from .smallball import (anderson_check, ball_prob, check_variational_inequality,
                        explicit_anderson_check, importance_ball_prob, min_cm_in_ball,
                        ratio_crn)
