"""Cost-aware Bayesian optimization of pre-training data mixtures across model scales and training steps."""

from mfmsbo.acquisition import AcquisitionState, decay_alpha, eipu, expected_improvement, select_next
from mfmsbo.baselines import HyperbandSchedule, hyperband_rf, random_search, rf_fit, rf_predict
from mfmsbo.errors import (
    BudgetExhaustedError,
    ConfigError,
    InvalidArgumentError,
    MfmsError,
    NumericFailureError,
    ParseError,
    ResourceLimitError,
    SimulatorError,
    ValidationError,
)
from mfmsbo.gp import GpHyperparams, GpPosterior, fit_hyperparams, fit_posterior, log_marginal_likelihood
from mfmsbo.history import BestSoFarCurve, BudgetLedger, CostModel, EvaluationRecord, History
from mfmsbo.optimizer import MfmsOptimizer, initialize, observe, run
from mfmsbo.simplex import SimplexDistanceKind, project_to_simplex, sample_dirichlet, simplex_distance
from mfmsbo.space import Configuration, SearchSpace

__version__ = "0.1.0"
