"""Expected-free-energy control with online Bayesian ARX identification."""

from .config import TrialConfig, load_config
from .distributions import (
    DistributionError,
    Gaussian,
    LocationScaleT,
    MatrixNormalWishart,
    MomentUndefinedError,
    gaussian_cross_entropy_from_t,
    mnw_log_pdf,
    t_entropy,
    t_log_pdf,
)
from .filtering import (
    ArxBeliefs,
    Buffers,
    ImproperLikelihoodMessage,
    NumericalBreakdownError,
    likelihood_message,
    make_regressor,
    negative_log_evidence,
    posterior_predictive,
    push_buffers,
    update_beliefs,
)
from .harness import TrialRecord, replay_free_energy, run_sweep, run_trial
from .mpc import mpc_cost, mpc_select
from .planning import (
    ControlBox,
    ControlPrior,
    GoalPrior,
    Plan,
    backward_message,
    efe,
    forward_message,
    laplace_goal,
    plan,
    select_control,
    standard_fe,
)
from .sim import PlantConfig, PlantState, build_matrices

__all__ = [
    "ArxBeliefs",
    "Buffers",
    "ControlBox",
    "ControlPrior",
    "DistributionError",
    "Gaussian",
    "GoalPrior",
    "ImproperLikelihoodMessage",
    "LocationScaleT",
    "MatrixNormalWishart",
    "MomentUndefinedError",
    "NumericalBreakdownError",
    "Plan",
    "PlantConfig",
    "PlantState",
    "TrialConfig",
    "TrialRecord",
    "backward_message",
    "build_matrices",
    "efe",
    "forward_message",
    "gaussian_cross_entropy_from_t",
    "laplace_goal",
    "likelihood_message",
    "load_config",
    "make_regressor",
    "mnw_log_pdf",
    "mpc_cost",
    "mpc_select",
    "negative_log_evidence",
    "plan",
    "posterior_predictive",
    "push_buffers",
    "replay_free_energy",
    "run_sweep",
    "run_trial",
    "select_control",
    "standard_fe",
    "t_entropy",
    "t_log_pdf",
    "update_beliefs",
]
