"""Value-profile active inference on a latent-volatility bandit, with model recovery."""

from .agents import AgentSpec
from .bandit import BanditEnvironment, Observation, TaskConfig
from .filtering import FactorizedBeliefs, predict, update
from .fitting import RunData, cross_validate, grid_search, sequence_loglik
from .generative_model import GenerativeModel, ModelHyperParams, build_model
from .profiles import ValueProfile, mix, profile_weights
from .recovery import ExperimentConfig, run_recovery
from .simulation import simulate

__all__ = [
    "AgentSpec",
    "BanditEnvironment",
    "ExperimentConfig",
    "FactorizedBeliefs",
    "GenerativeModel",
    "ModelHyperParams",
    "Observation",
    "RunData",
    "TaskConfig",
    "ValueProfile",
    "build_model",
    "cross_validate",
    "grid_search",
    "mix",
    "predict",
    "profile_weights",
    "run_recovery",
    "sequence_loglik",
    "simulate",
    "update",
]
