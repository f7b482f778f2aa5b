"""Closed-loop agent/environment simulation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .agents import AgentSpec, agent_step, decide, initial_state
from .bandit import BanditEnvironment, EnvState, Observation, TaskConfig
from .generative_model import GenerativeModel
from .policy import action_loglik, sample_action


@dataclass(frozen=True)
class TrialRecord:
    """One simulated trial.

    ``q_ctx_volatile`` and ``q_arm_left`` are posterior beliefs after the
    trial's observation; ``weights``, ``gamma_eff`` and ``xi_hint_eff`` are the
    control parameters in force when the action was chosen.
    """

    trial: int
    truth: EnvState
    action: int
    obs: Observation
    posterior: np.ndarray
    action_loglik: float
    q_ctx_volatile: float | None = None
    q_arm_left: float | None = None
    weights: np.ndarray | None = None
    gamma_eff: float | None = None
    xi_hint_eff: float | None = None


def run_streams(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    """Independent environment and agent generators derived from one run seed."""
    env_ss, agent_ss = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(env_ss), np.random.default_rng(agent_ss)


def simulate(
    spec: AgentSpec,
    task: TaskConfig,
    model: GenerativeModel,
    seed: int | None = None,
) -> list[TrialRecord]:
    """Run ``spec`` through one session; ``seed`` defaults to ``task.seed``."""
    env_rng, agent_rng = run_streams(task.seed if seed is None else seed)
    env = BanditEnvironment(task, rng=env_rng)
    state = initial_state(spec, model)
    records = []
    while not env.done:
        truth = env.state
        decision = decide(spec, state, model)
        action = sample_action(decision.posterior, agent_rng)
        obs = env.step(action)
        state = agent_step(spec, state, action, obs, model)
        beliefs = state.beliefs
        records.append(
            TrialRecord(
                trial=truth.trial_index,
                truth=truth,
                action=action,
                obs=obs,
                posterior=decision.posterior,
                action_loglik=action_loglik(decision.posterior, action),
                q_ctx_volatile=None if beliefs is None else float(beliefs.context[0]),
                q_arm_left=None if beliefs is None else float(beliefs.better_arm[0]),
                weights=decision.weights,
                gamma_eff=decision.gamma_eff,
                xi_hint_eff=decision.xi_hint_eff,
            )
        )
    return records
