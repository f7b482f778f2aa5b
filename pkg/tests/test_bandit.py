import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from valueprofiles.bandit import (
    HINT,
    LEFT,
    LOSS,
    NULL,
    RIGHT,
    STABLE,
    START,
    VOLATILE,
    WIN,
    BanditEnvironment,
    Observation,
    TaskConfig,
    context_schedule,
)
from valueprofiles.errors import ConfigError, SequenceExhaustedError

N_BIG = 100_000


def single_block(context: str, n=N_BIG, **kw) -> TaskConfig:
    return TaskConfig(n_trials=n, context_block_len=n, first_context=context, **kw)


def env_with_left_better(cfg: TaskConfig) -> BanditEnvironment:
    for seed in range(50):
        env = BanditEnvironment(cfg, np.random.default_rng(seed))
        if env.better_arms[0] == 0:
            return env
    raise AssertionError("no seed with left as better arm")


def test_first_trial_is_volatile(task):
    assert context_schedule(task)[0] == VOLATILE


def test_context_flips_at_trial_40(task):
    sched = context_schedule(task)
    assert sched[39] == VOLATILE and sched[40] == STABLE and sched[80] == VOLATILE


@pytest.mark.parametrize("seed", range(5))
def test_volatile_better_arm_switches_every_ten_trials(task, seed):
    env = BanditEnvironment(task, np.random.default_rng(seed))
    arms = env.better_arms
    assert len(set(arms[0:10])) == 1 and len(set(arms[10:20])) == 1
    assert arms[0] != arms[10]


@pytest.mark.parametrize("seed", range(5))
def test_stable_block_keeps_one_arm(task, seed):
    env = BanditEnvironment(task, np.random.default_rng(seed))
    for start in range(40, 400, 80):
        assert len(set(env.better_arms[start : start + 40])) == 1


def test_start_gives_all_null(task):
    env = BanditEnvironment(task, np.random.default_rng(0))
    assert env.step(START) == Observation(NULL, NULL, START)


def test_hint_accuracy_frequency():
    env = env_with_left_better(single_block("stable"))
    hits = sum(env.step(HINT).hint == 1 for _ in range(N_BIG))
    assert abs(hits / N_BIG - 0.85) <= 0.01


def test_stable_good_arm_win_frequency():
    env = env_with_left_better(single_block("stable"))
    wins = sum(env.step(LEFT).reward == WIN for _ in range(N_BIG))
    assert abs(wins / N_BIG - 0.90) <= 0.01


@pytest.mark.parametrize("context,action,p", [("volatile", LEFT, 0.7), ("volatile", RIGHT, 0.3), ("stable", RIGHT, 0.1)])
def test_reward_frequency_within_three_sigma(context, action, p):
    # one block, no arm switches, left better throughout
    env = env_with_left_better(single_block(context, volatile_arm_switch_period=N_BIG))
    wins = sum(env.step(action).reward == WIN for _ in range(N_BIG))
    assert abs(wins / N_BIG - p) <= 3 * math.sqrt(p * (1 - p) / N_BIG)


def test_null_outcomes_follow_action(task):
    env = BanditEnvironment(task, np.random.default_rng(3))
    for a in [START, HINT, LEFT, RIGHT] * 100:
        obs = env.step(a)
        assert obs.choice == a
        assert (obs.reward == NULL) == (a in (START, HINT))
        assert (obs.hint == NULL) == (a != HINT)
        assert obs.reward in (NULL, LOSS, WIN)


def test_stepping_past_end_raises():
    env = BanditEnvironment(TaskConfig(n_trials=40), np.random.default_rng(0))
    for _ in range(40):
        env.step(LEFT)
    assert env.done
    with pytest.raises(SequenceExhaustedError):
        env.step(LEFT)


@pytest.mark.parametrize(
    "kw",
    [
        {"hint_accuracy": 1.2},
        {"p_reward_stable": (0.9, -0.1)},
        {"p_reward_volatile": (0.3, 0.7)},
        {"first_context": "calm"},
        {"n_trials": 0},
    ],
)
def test_invalid_config_rejected(kw):
    with pytest.raises(ConfigError):
        TaskConfig(**kw)


def test_ragged_blocks_warn_but_are_allowed():
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        cfg = TaskConfig(n_trials=100, context_block_len=40)
        env = BanditEnvironment(cfg, np.random.default_rng(0))
    assert any("multiple" in str(w.message) for w in caught)
    assert len(env.better_arms) == 100


def test_block_length_100_supported():
    cfg = TaskConfig(n_trials=400, context_block_len=100)
    sched = context_schedule(cfg)
    assert list(sched[[0, 99, 100, 199, 200]]) == [VOLATILE, VOLATILE, STABLE, STABLE, VOLATILE]


@settings(max_examples=40, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    actions=st.lists(st.integers(0, 3), min_size=1, max_size=80),
)
def test_same_seed_and_actions_reproduce_observations(seed, actions):
    cfg = TaskConfig(n_trials=80)
    a = BanditEnvironment(cfg, np.random.default_rng(seed))
    b = BanditEnvironment(cfg, np.random.default_rng(seed))
    assert [a.step(x) for x in actions] == [b.step(x) for x in actions]


@settings(max_examples=40, deadline=None)
@given(
    block=st.integers(1, 60),
    n_blocks=st.integers(1, 8),
    first=st.sampled_from(["volatile", "stable"]),
    seed=st.integers(0, 1000),
    actions=st.lists(st.integers(0, 3), min_size=1, max_size=40),
)
def test_schedule_periodic_and_action_independent(block, n_blocks, first, seed, actions):
    cfg = TaskConfig(n_trials=block * n_blocks, context_block_len=block, first_context=first)
    sched = context_schedule(cfg)
    t = np.arange(cfg.n_trials)
    assert np.array_equal(sched[t[block:]], sched[t[:-block]] ^ 1) if n_blocks > 1 else True
    env_a = BanditEnvironment(cfg, np.random.default_rng(seed))
    env_b = BanditEnvironment(cfg, np.random.default_rng(seed))
    for x in actions[: cfg.n_trials]:
        env_a.step(x)
    assert np.array_equal(env_a.contexts, env_b.contexts)
    assert np.array_equal(env_a.better_arms, env_b.better_arms)
