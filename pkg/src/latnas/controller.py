"""Policy-gradient search agent and the sample-eval-update loop.

Each step samples a batch of token sequences from the policy, decodes and
evaluates them, scalarizes (accuracy, latency) into a reward, and ascends
the likelihood-ratio gradient (REINFORCE with an EMA baseline, or PPO-clip).
The ledger is append-only, one record per sample, and deliberately contains
only replayable fields (tokens, accuracy, latency, reward) so that two runs
with the same seed produce byte-identical ledgers at any parallelism;
evaluation results are merged in sample-index order.

The per-step RNG is seeded as (seed, step), so resuming from a checkpoint
replays the exact stream the uninterrupted run would have used.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .arch import SearchSpaceSkeleton
from .codec import decode, slot_arities
from .errors import LatnasError
from .evaluators import arch_identifier, evaluate
from .policy import (
    Policy,
    add_scaled,
    make_policy,
    policy_from_json,
    policy_to_json,
    zero_like,
)
from .reward import Measurement, RewardConfig, reward

CHECKPOINT_VERSION = 1

_LR_DEFAULTS = {"independent": 0.05, "recurrent": 0.0006}


@dataclass(frozen=True)
class SearchConfig:
    batch_size: int = 16
    total_samples: int = 8000
    learning_rate: float | None = None  # per-mode default when None
    baseline_decay: float = 0.9
    update_rule: str = "reinforce"  # "reinforce" | "ppo"
    ppo_epsilon: float = 0.2
    ppo_epochs: int = 3
    entropy_weight: float = 1e-4
    seed: int = 0
    policy_mode: str = "independent"
    checkpoint_every: int = 10  # steps between checkpoint writes

    def __post_init__(self):
        if self.batch_size < 1 or self.total_samples < 1:
            raise ValueError("batch_size and total_samples must be >= 1")
        if self.total_samples % self.batch_size != 0:
            raise ValueError("total_samples must be a multiple of batch_size")
        if not 0.0 < self.ppo_epsilon < 1.0:
            raise ValueError("ppo_epsilon must be in (0, 1)")
        if self.entropy_weight < 0:
            raise ValueError("entropy_weight must be >= 0")
        if self.update_rule not in ("reinforce", "ppo"):
            raise ValueError(f"unknown update rule {self.update_rule!r}")

    @property
    def lr(self) -> float:
        return self.learning_rate if self.learning_rate is not None \
            else _LR_DEFAULTS[self.policy_mode]


@dataclass
class SearchState:
    policy: Policy
    baseline: float = 0.0
    step: int = 0
    samples: int = 0
    ledger: list[dict] = field(default_factory=list)


def update_reinforce(state: SearchState, batch: list[tuple[tuple[int, ...], float]],
                     cfg: SearchConfig) -> SearchState:
    """theta += lr * mean((R - baseline) * grad log pi) + entropy term."""
    n = len(batch)
    grad = zero_like(state.policy.params)
    for tokens, r in batch:
        _, g = state.policy.weighted_grad(
            tokens, (r - state.baseline) / n, cfg.entropy_weight / n)
        add_scaled(grad, g, 1.0)
    add_scaled(state.policy.params, grad, cfg.lr)
    mean_r = sum(r for _, r in batch) / n
    state.baseline = cfg.baseline_decay * state.baseline \
        + (1.0 - cfg.baseline_decay) * mean_r
    return state


def update_ppo(state: SearchState,
               batch: list[tuple[tuple[int, ...], float, float]],
               cfg: SearchConfig) -> SearchState:
    """Clipped-surrogate ascent; batch entries are (tokens, reward, old_logp).

    With a very large epsilon and epochs=1 the first pass has ratio exactly 1
    and reproduces the REINFORCE step bit for bit.
    """
    n = len(batch)
    eps = cfg.ppo_epsilon
    for _ in range(cfg.ppo_epochs):
        grad = zero_like(state.policy.params)
        for tokens, r, old_logp in batch:
            adv = r - state.baseline
            logp = state.policy.log_prob(tokens)
            ratio = math.exp(logp - old_logp)
            # the clipped term's gradient vanishes once the ratio leaves the
            # trust region in the advantage's favored direction
            active = ratio <= 1.0 + eps if adv >= 0 else ratio >= 1.0 - eps
            w = (ratio * adv / n) if active else 0.0
            _, g = state.policy.weighted_grad(tokens, w, cfg.entropy_weight / n)
            add_scaled(grad, g, 1.0)
        add_scaled(state.policy.params, grad, cfg.lr)
    mean_r = sum(r for _, r, _ in batch) / n
    state.baseline = cfg.baseline_decay * state.baseline \
        + (1.0 - cfg.baseline_decay) * mean_r
    return state


def ledger_record(step: int, index: int, arch_id: str, tokens, evaluation,
                  r: float) -> dict:
    return {
        "step": step,
        "index": index,
        "arch_id": arch_id,
        "tokens": list(tokens),
        "accuracy": evaluation.accuracy,
        "latency_ms": evaluation.latency_ms,
        "source": evaluation.source,
        "reward": r,
    }


def write_ledger_lines(fh, records: list[dict]) -> None:
    for rec in records:
        fh.write(json.dumps(rec, sort_keys=False) + "\n")
    fh.flush()


def checkpoint_to_json(state: SearchState, cfg: SearchConfig) -> dict:
    return {
        "checkpoint_version": CHECKPOINT_VERSION,
        "step": state.step,
        "samples": state.samples,
        "baseline": state.baseline,
        "seed": cfg.seed,
        "policy": policy_to_json(state.policy),
    }


def checkpoint_from_json(doc: dict) -> SearchState:
    if doc.get("checkpoint_version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint_version {doc.get('checkpoint_version')}")
    return SearchState(policy=policy_from_json(doc["policy"]),
                       baseline=float(doc["baseline"]),
                       step=int(doc["step"]), samples=int(doc["samples"]))


def load_checkpoint(path: str) -> SearchState:
    with open(path) as fh:
        return checkpoint_from_json(json.load(fh))


def save_checkpoint(state: SearchState, cfg: SearchConfig, path: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        json.dump(checkpoint_to_json(state, cfg), fh)
    os.replace(tmp, path)


def _evaluate_batch(archs, ids, toks, acc_source, lat_source, parallelism: int):
    if parallelism <= 1 or len(archs) <= 1:
        return [evaluate(a, acc_source, lat_source, arch_id=i, tokens=t)
                for a, i, t in zip(archs, ids, toks)]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        futures = [pool.submit(evaluate, a, acc_source, lat_source,
                               arch_id=i, tokens=t)
                   for a, i, t in zip(archs, ids, toks)]
        return [f.result() for f in futures]  # merged in sample-index order


def run_search(skeleton: SearchSpaceSkeleton, reward_cfg: RewardConfig,
               cfg: SearchConfig, acc_source, lat_source, *,
               parallelism: int = 1, resume: SearchState | None = None,
               ledger_fh=None, checkpoint_path: str | None = None) -> SearchState:
    """Run the sample-eval-update loop for total_samples evaluations.

    `resume` continues a checkpointed state (sample numbering has no gaps).
    Evaluator failures abort the run after flushing the ledger.
    """
    if resume is not None:
        state = resume
    else:
        state = SearchState(policy=make_policy(slot_arities(skeleton),
                                               mode=cfg.policy_mode,
                                               rng=np.random.default_rng(cfg.seed)))
    total_steps = cfg.total_samples // cfg.batch_size
    while state.step < total_steps:
        step = state.step
        rng = np.random.default_rng([cfg.seed, step])
        toks = [state.policy.sample(rng) for _ in range(cfg.batch_size)]
        archs = [decode(t, skeleton) for t in toks]
        ids = [arch_identifier(a) for a in archs]
        old_logps = [state.policy.log_prob(t) for t in toks] \
            if cfg.update_rule == "ppo" else None
        try:
            evals = _evaluate_batch(archs, ids, toks, acc_source, lat_source,
                                    parallelism)
        except LatnasError:
            if ledger_fh is not None:
                ledger_fh.flush()
            raise
        rewards = [reward(Measurement(e.accuracy, e.latency_ms), reward_cfg)
                   for e in evals]
        records = [
            ledger_record(step, state.samples + i, ids[i], toks[i], evals[i],
                          rewards[i])
            for i in range(cfg.batch_size)
        ]
        state.ledger.extend(records)
        if ledger_fh is not None:
            write_ledger_lines(ledger_fh, records)
        state.samples += cfg.batch_size

        if cfg.update_rule == "ppo":
            update_ppo(state, list(zip(toks, rewards, old_logps)), cfg)
        else:
            update_reinforce(state, list(zip(toks, rewards)), cfg)
        state.step += 1
        if checkpoint_path and (state.step % cfg.checkpoint_every == 0
                                or state.step == total_steps):
            save_checkpoint(state, cfg, checkpoint_path)
    return state
