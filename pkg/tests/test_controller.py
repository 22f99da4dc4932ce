import copy
import json
import math

import numpy as np
import pytest

from latnas.controller import (
    SearchConfig,
    SearchState,
    checkpoint_from_json,
    checkpoint_to_json,
    run_search,
    update_ppo,
    update_reinforce,
)
from latnas.errors import ExternalEvaluatorFailure
from latnas.evaluators import ProfileLatency, SurrogateAccuracy, SurrogateConfig
from latnas.policy import IndependentPolicy, make_policy
from latnas.reward import Measurement, RewardConfig, reward
from latnas.skeletons import default_profile


def bandit_state():
    return SearchState(policy=IndependentPolicy([2]))


def bandit_batch(policy, rng, n, rewards=(1.0, 0.0)):
    toks = [policy.sample(rng) for _ in range(n)]
    return [(t, rewards[t[0]]) for t in toks]


class TestReinforce:
    def test_zero_advantage_no_entropy_leaves_params_unchanged(self):
        state = bandit_state()
        state.baseline = 0.7
        before = copy.deepcopy(state.policy.params)
        cfg = SearchConfig(batch_size=4, total_samples=4, entropy_weight=0.0)
        update_reinforce(state, [((0,), 0.7), ((1,), 0.7)], cfg)
        assert np.array_equal(state.policy.params["logits_0"], before["logits_0"])

    def test_entropy_term_still_moves_params(self):
        state = bandit_state()
        state.policy.params["logits_0"][:] = [1.0, 0.0]
        state.baseline = 0.7
        cfg = SearchConfig(batch_size=4, total_samples=4, entropy_weight=0.1)
        update_reinforce(state, [((0,), 0.7)], cfg)
        assert not np.array_equal(state.policy.params["logits_0"],
                                  np.array([1.0, 0.0]))

    def test_baseline_ema_arithmetic(self):
        state = bandit_state()
        cfg = SearchConfig(batch_size=4, total_samples=4, baseline_decay=0.9,
                           entropy_weight=0.0)
        update_reinforce(state, [((0,), 0.8), ((1,), 0.4)], cfg)
        assert state.baseline == pytest.approx(0.1 * 0.6)

    def test_bandit_converges(self):
        state = bandit_state()
        cfg = SearchConfig(batch_size=16, total_samples=16, learning_rate=0.1,
                           entropy_weight=0.0, baseline_decay=0.9)
        rng = np.random.default_rng(0)
        for _ in range(500):
            update_reinforce(state, bandit_batch(state.policy, rng, 16), cfg)
        logits = state.policy.params["logits_0"]
        p_best = math.exp(logits[0]) / (math.exp(logits[0]) + math.exp(logits[1]))
        assert p_best > 0.95


class TestPpo:
    def test_equals_reinforce_with_huge_epsilon_one_epoch(self):
        arities = [3, 2, 4]
        rng = np.random.default_rng(3)
        policy_a = make_policy(arities)
        for k in policy_a.params:
            policy_a.params[k] = rng.standard_normal(policy_a.params[k].shape)
        policy_b = IndependentPolicy(arities,
                                     params=copy.deepcopy(policy_a.params))
        batch_tokens = [policy_a.sample(np.random.default_rng([7, i]))
                        for i in range(8)]
        rewards = [float(np.random.default_rng([8, i]).random())
                   for i in range(8)]

        cfg_r = SearchConfig(batch_size=8, total_samples=8, entropy_weight=0.0)
        state_r = SearchState(policy=policy_a, baseline=0.3)
        update_reinforce(state_r, list(zip(batch_tokens, rewards)), cfg_r)

        cfg_p = SearchConfig(batch_size=8, total_samples=8, entropy_weight=0.0,
                             update_rule="ppo", ppo_epsilon=0.999, ppo_epochs=1)
        state_p = SearchState(policy=policy_b, baseline=0.3)
        old = [policy_b.log_prob(t) for t in batch_tokens]
        # epsilon 0.999 is effectively unbounded here since every ratio is 1
        update_ppo(state_p, list(zip(batch_tokens, rewards, old)), cfg_p)

        for k in policy_a.params:
            assert np.abs(policy_a.params[k] - policy_b.params[k]).max() <= 1e-10
        assert state_r.baseline == pytest.approx(state_p.baseline, abs=1e-12)

    def test_clipped_sample_contributes_no_gradient(self):
        policy = IndependentPolicy([2])
        state = SearchState(policy=policy, baseline=0.0)
        cfg = SearchConfig(batch_size=1, total_samples=1, entropy_weight=0.0,
                           update_rule="ppo", ppo_epsilon=0.2, ppo_epochs=1)
        # old log-prob far below current: ratio >> 1+eps with positive advantage
        old_logp = policy.log_prob((0,)) - 1.0
        before = policy.params["logits_0"].copy()
        update_ppo(state, [((0,), 1.0, old_logp)], cfg)
        assert np.array_equal(policy.params["logits_0"], before)

    def test_bandit_converges(self):
        state = bandit_state()
        cfg = SearchConfig(batch_size=16, total_samples=16, learning_rate=0.1,
                           entropy_weight=0.0, update_rule="ppo",
                           ppo_epsilon=0.2, ppo_epochs=3)
        rng = np.random.default_rng(1)
        for _ in range(500):
            toks = [state.policy.sample(rng) for _ in range(16)]
            old = [state.policy.log_prob(t) for t in toks]
            batch = [(t, (1.0, 0.0)[t[0]], o) for t, o in zip(toks, old)]
            update_ppo(state, batch, cfg)
        logits = state.policy.params["logits_0"]
        p_best = math.exp(logits[0]) / (math.exp(logits[0]) + math.exp(logits[1]))
        assert p_best > 0.95


def tiny_sources(profile):
    return (SurrogateAccuracy(SurrogateConfig(capacity_half_point=1.2e6)),
            ProfileLatency(profile))


class TestRunSearch:
    def test_sample_accounting(self, tiny, profile):
        acc, lat = tiny_sources(profile)
        cfg = SearchConfig(batch_size=16, total_samples=64, seed=0)
        state = run_search(tiny, RewardConfig.soft(0.5), cfg, acc, lat)
        assert state.step == 4
        assert state.samples == 64
        assert len(state.ledger) == 64
        assert [r["index"] for r in state.ledger] == list(range(64))

    def test_ledger_rewards_replay_bitwise(self, tiny, profile):
        acc, lat = tiny_sources(profile)
        rc = RewardConfig.soft(0.5)
        cfg = SearchConfig(batch_size=16, total_samples=64, seed=1)
        state = run_search(tiny, rc, cfg, acc, lat)
        for rec in state.ledger:
            replayed = reward(Measurement(rec["accuracy"], rec["latency_ms"]), rc)
            assert replayed == rec["reward"]

    def test_parallelism_does_not_change_ledger(self, tiny, profile):
        acc, lat = tiny_sources(profile)
        rc = RewardConfig.soft(0.5)
        cfg = SearchConfig(batch_size=16, total_samples=64, seed=2)
        s1 = run_search(tiny, rc, cfg, acc, lat, parallelism=1)
        s8 = run_search(tiny, rc, cfg, acc, lat, parallelism=8)
        assert s1.ledger == s8.ledger

    def test_checkpoint_round_trip_and_resume(self, tiny, profile):
        acc, lat = tiny_sources(profile)
        rc = RewardConfig.soft(0.5)
        cfg = SearchConfig(batch_size=16, total_samples=64, seed=3)
        full = run_search(tiny, rc, cfg, acc, lat)

        half_cfg = SearchConfig(batch_size=16, total_samples=32, seed=3)
        half = run_search(tiny, rc, half_cfg, acc, lat)
        restored = checkpoint_from_json(checkpoint_to_json(half, half_cfg))
        resumed = run_search(tiny, rc, cfg, acc, lat, resume=restored)
        assert resumed.samples == 64
        # the resumed ledger holds the second half, numbered without gaps
        assert [r["index"] for r in resumed.ledger] == list(range(32, 64))
        assert resumed.ledger == full.ledger[32:]

    def test_evaluator_failure_aborts_after_ledger_flush(self, tiny, tmp_path):
        calls = {"n": 0}

        def failing_acc(arch):
            calls["n"] += 1
            if calls["n"] > 20:
                raise ExternalEvaluatorFailure("boom")
            return 0.5

        lat = ProfileLatency(default_profile())
        cfg = SearchConfig(batch_size=16, total_samples=64, seed=4)
        path = tmp_path / "ledger.jsonl"
        with open(path, "w") as fh:
            with pytest.raises(ExternalEvaluatorFailure):
                run_search(tiny, RewardConfig.soft(0.5), cfg, failing_acc, lat,
                           ledger_fh=fh)
        lines = path.read_text().splitlines()
        assert len(lines) == 16  # the completed first batch survived
        json.loads(lines[0])

    def test_learning_signal_present(self, tiny, profile):
        acc, lat = tiny_sources(profile)
        cfg = SearchConfig(batch_size=20, total_samples=2000, learning_rate=0.15,
                           entropy_weight=1e-3, baseline_decay=0.8, seed=5)
        state = run_search(tiny, RewardConfig.soft(0.5), cfg, acc, lat)
        rewards = [r["reward"] for r in state.ledger]
        first, last = rewards[:200], rewards[-200:]
        assert sum(last) / 200 >= sum(first) / 200


def test_search_config_validation():
    with pytest.raises(ValueError):
        SearchConfig(batch_size=16, total_samples=100)  # not a multiple
    with pytest.raises(ValueError):
        SearchConfig(ppo_epsilon=1.5)
    with pytest.raises(ValueError):
        SearchConfig(update_rule="sgd")
    assert SearchConfig().lr == 0.05
    assert SearchConfig(policy_mode="recurrent").lr == 0.0006
