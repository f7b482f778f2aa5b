import math
from collections import Counter
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from valueprofiles.agents import AgentSpec
from valueprofiles.errors import ConfigError, ContractError
from valueprofiles.fitting import (
    M1_COARSE,
    RunData,
    aic,
    batch_trial_logliks,
    bic,
    build_trace,
    coarse_grid,
    cross_validate,
    fine_grid,
    fold_masks,
    grid_search,
    replay_trial_logliks,
    select_best,
    sequence_loglik,
)
from valueprofiles.simulation import simulate


@pytest.fixture(scope="module")
def datasets(task, model):
    """One session per generator kind, keyed by kind."""
    return {
        k: RunData.from_records(simulate(AgentSpec(k), task, model, seed=21), label=k, seed=21)
        for k in ("M1", "M2", "M3", "EpsGreedy", "SoftmaxQ")
    }


@pytest.fixture(scope="module")
def traces(datasets, model):
    return {k: build_trace(d, model) for k, d in datasets.items()}


PARAM_SAMPLES = {
    "M1": [{"gamma": g} for g in (0.3, 2.5, 16.0)],
    "M2": [{"gamma_base": 8.0, "kappa": 0.05}, {"gamma_base": 0.7, "kappa": 4.0}],
    "M3": [
        {"gamma0": 1.0, "gamma1": 5.0, "hint_scale": 4.0, "arm_scale": 0.5},
        {"gamma0": 5.0, "gamma1": 2.5, "hint_scale": 0.5, "arm_scale": 2.0},
    ],
}


@pytest.mark.parametrize("generator", ["M3", "EpsGreedy"])
@pytest.mark.parametrize("kind", ["M1", "M2", "M3"])
def test_vectorized_path_matches_stepwise_replay(datasets, traces, model, generator, kind):
    data, trace = datasets[generator], traces[generator]
    for params in PARAM_SAMPLES[kind]:
        spec = AgentSpec(kind, params)
        ref, _ = replay_trial_logliks(spec, data, model)
        fast = batch_trial_logliks(kind, np.array([spec.param_tuple]), trace, data.actions)[0]
        np.testing.assert_allclose(fast, ref, rtol=0, atol=1e-10)


def test_sequence_loglik_paths_agree(datasets, traces, model):
    spec = AgentSpec("M3")
    mask = fold_masks(400)[2]
    a = sequence_loglik(spec, datasets["M3"], model, mask)
    b = sequence_loglik(spec, datasets["M3"], model, mask, trace=traces["M3"])
    assert a == pytest.approx(b, abs=1e-9)


def test_q_learning_likelihood_replays_generator(datasets, model, task):
    data = datasets["EpsGreedy"]
    records = simulate(AgentSpec("EpsGreedy"), task, model, seed=21)
    assert sequence_loglik(AgentSpec("EpsGreedy"), data, model) == pytest.approx(sum(r.action_loglik for r in records))


def test_flat_agent_gives_uniform_likelihood(datasets, model):
    mask = fold_masks(400)[1]
    ll = sequence_loglik(AgentSpec("M1", {"gamma": 1e-12}), datasets["M3"], model, mask)
    assert ll == pytest.approx(80 * math.log(0.25), abs=1e-6)


def test_empty_mask_gives_zero(datasets, model):
    assert sequence_loglik(AgentSpec("M2"), datasets["M1"], model, np.zeros(400, bool)) == 0.0


@pytest.mark.parametrize("kind,n_eval", [("M1", 8 + 7), ("M2", 42 + 36), ("M3", 108)])
def test_grid_sizes(datasets, traces, model, kind, n_eval):
    res = grid_search(kind, datasets["M3"], np.ones(400, bool), model, trace=traces["M3"])
    assert len(res.search_trace) == n_eval
    assert len(coarse_grid("M3")) == 108


def test_tie_goes_to_smallest_tuple():
    cands = np.array([[2.0, 1.0], [1.0, 3.0], [1.0, 2.0], [3.0, 0.0]])
    lls = np.array([-5.0, -4.0, -4.0, -4.0])
    assert select_best(cands, lls) == 2


def test_strict_maximum_beats_smaller_tuple():
    cands = np.array([[1.0], [2.0]])
    assert select_best(cands, np.array([-4.0, -3.0])) == 1


@pytest.mark.parametrize("best,lo,hi", [(0.5, 0.5, 1.0), (2.5, 1.5, 4.0), (16.0, 12.0, 16.0)])
def test_m1_fine_interval_spans_neighbors(best, lo, hi):
    fine = fine_grid("M1", (best,))[:, 0]
    assert len(fine) == 7 and fine[0] == lo and fine[-1] == hi
    np.testing.assert_allclose(np.diff(fine), (hi - lo) / 6)


def test_m2_fine_grid_shape():
    fine = fine_grid("M2", (2.5, 1.0))
    assert fine.shape == (36, 2)
    assert fine[:, 0].min() == 1.5 and fine[:, 0].max() == 4.0
    assert fine[:, 1].min() == 0.5 and fine[:, 1].max() == 2.0


@pytest.mark.parametrize("generator", ["M1", "M2", "M3", "SoftmaxQ"])
@pytest.mark.parametrize("kind", ["M1", "M2"])
def test_selected_params_lie_in_declared_grids(datasets, traces, model, generator, kind):
    for test in fold_masks(400):
        res = grid_search(kind, datasets[generator], ~test, model, trace=traces[generator])
        allowed = np.vstack([coarse_grid(kind), fine_grid(kind, res.coarse_best)])
        best = np.array(list(res.best_params.values()))
        assert any(np.array_equal(best, row) for row in allowed)


def test_fold_boundaries():
    masks = fold_masks(400)
    assert [tuple(np.flatnonzero(m)[[0, -1]]) for m in masks] == [(0, 79), (80, 159), (160, 239), (240, 319), (320, 399)]
    assert np.array_equal(sum(m.astype(int) for m in masks), np.ones(400))


def test_uneven_folds_rejected(datasets, model):
    with pytest.raises(ConfigError):
        fold_masks(401)
    short = RunData(*(getattr(datasets["M1"], f)[:399] for f in ("actions", "hints", "rewards", "choices", "contexts", "better_arms")))
    with pytest.raises(ConfigError):
        cross_validate("M1", short, model)


def test_information_criteria_hand_values():
    assert aic(1, -3.1) == pytest.approx(8.2)
    assert aic(4, -32.0) == pytest.approx(72.0)
    assert bic(1, -3.1, 80) == pytest.approx(math.log(80) + 6.2)
    assert bic(4, -32.0, 80) == pytest.approx(4 * math.log(80) + 64.0)


def test_cross_validation_bookkeeping(datasets, traces, model):
    fit = cross_validate("M2", datasets["M2"], model, trace=traces["M2"])
    tests = np.array([f.test_ll for f in fit.folds])
    assert fit.mean_test_ll == pytest.approx(tests.mean())
    assert fit.se_test_ll == pytest.approx(tests.std(ddof=1) / math.sqrt(5))
    assert fit.aic == pytest.approx(2 * 2 - 2 * tests.mean())
    assert fit.bic == pytest.approx(2 * math.log(80) - 2 * tests.mean())
    for f, test in zip(fit.folds, fold_masks(400)):
        spec = AgentSpec("M2", f.best_params)
        assert f.test_ll == pytest.approx(sequence_loglik(spec, datasets["M2"], model, test), abs=1e-9)
        assert f.train_ll == pytest.approx(sequence_loglik(spec, datasets["M2"], model, ~test), abs=1e-9)


def test_cross_validation_is_deterministic_and_blind(datasets, model):
    data = datasets["M3"]
    a = cross_validate("M3", data, model).to_dict(include_trace=True)
    b = cross_validate("M3", replace(data, label="M1", seed=999), model).to_dict(include_trace=True)
    assert a == b


def test_rundata_checks_echo(datasets):
    d = datasets["M1"]
    with pytest.raises(ContractError):
        replace(d, choices=(d.choices + 1) % 4)


def test_only_active_inference_models_are_fitted(datasets, model):
    with pytest.raises(ContractError):
        grid_search("EpsGreedy", datasets["M1"], np.ones(400, bool), model)


@pytest.fixture(scope="module")
def m1_runs(task, model):
    runs = [RunData.from_records(simulate(AgentSpec("M1"), task, model, seed=s)) for s in range(5)]
    return [(d, build_trace(d, model)) for d in runs]


def test_m1_coarse_mode_is_generating_value(m1_runs, model):
    picks = Counter(grid_search("M1", d, np.ones(400, bool), model, trace=tr).coarse_best for d, tr in m1_runs)
    assert picks.most_common(1)[0][0] == (2.5,)


def test_generating_precision_tops_coarse_grid_on_training_folds(m1_runs, model):
    hits = total = 0
    for d, tr in m1_runs:
        for test in fold_masks(400):
            lls = batch_trial_logliks("M1", coarse_grid("M1"), tr, d.actions)[:, ~test].sum(axis=1)
            hits += M1_COARSE[select_best(coarse_grid("M1"), lls)] == 2.5
            total += 1
    assert hits / total >= 0.9


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10_000), gamma=st.floats(0.2, 20), kappa=st.floats(0, 5))
def test_replay_paths_agree_on_random_sessions(task, model, seed, gamma, kappa):
    data = RunData.from_records(simulate(AgentSpec("SoftmaxQ", {"beta": 3.0}), task, model, seed=seed))
    spec = AgentSpec("M2", {"gamma_base": gamma, "kappa": kappa})
    ref, _ = replay_trial_logliks(spec, data, model)
    fast = batch_trial_logliks("M2", np.array([spec.param_tuple]), build_trace(data, model), data.actions)[0]
    np.testing.assert_allclose(fast, ref, atol=1e-10)
