"""Scripted rollout simulator for batching experiments.

Each question has a fixed probability of being answered correctly, so a
group's outcome depends only on the question and the simulator's RNG. The
saturated scenario makes most of the pool always-correct, which is the
regime where unfiltered dynamic sampling throws away most of its rollouts.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .. import sampler
from ..core import RolloutGroup, TrainConfig, Trajectory, make_rng

_EMPTY = np.zeros(0)
_TERMINAL = np.zeros(1)


def scripted_group(question_id: str, n_correct: int, n: int) -> RolloutGroup:
    """A group of zero-length trajectories with the given outcome count."""
    trajs = tuple(
        Trajectory(question_id, np.zeros(0, dtype=np.int64), _EMPTY, _EMPTY, _TERMINAL,
                   terminal_reward=2.0 if i < n_correct else -1.5, is_correct=i < n_correct)
        for i in range(n))
    return RolloutGroup(question_id, trajs)


@dataclass
class ScriptedEnv:
    success: dict       # question_id -> probability of a correct response
    n: int
    rng: np.random.Generator

    @property
    def pool(self) -> list:
        return list(self.success)

    def __call__(self, plan) -> list:
        counts = self.rng.binomial(self.n, [self.success[q] for q in plan.question_ids])
        return [scripted_group(q, int(c), self.n) for q, c in zip(plan.question_ids, counts)]


def saturated_env(pool_size=500, easy_frac=0.7, hard_frac=0.1, n=8, seed=0) -> ScriptedEnv:
    """``easy_frac`` always correct, ``hard_frac`` never correct, the rest in [0.3, 0.7]."""
    rng = make_rng(seed, 20)
    n_easy = int(round(easy_frac * pool_size))
    n_hard = int(round(hard_frac * pool_size))
    probs = np.concatenate([np.ones(n_easy), np.zeros(n_hard),
                            rng.uniform(0.3, 0.7, pool_size - n_easy - n_hard)])
    rng.shuffle(probs)
    success = {f"s{i:04d}": float(p) for i, p in enumerate(probs)}
    return ScriptedEnv(success, n, make_rng(seed, 21))


def waste_run(config: TrainConfig, mode: str, steps: int = 100, pool_size: int = 500,
              easy_frac: float = 0.7, hard_frac: float = 0.1) -> dict:
    """Run ``steps`` accumulations in ``mode``; returns aggregate waste counts."""
    cfg = replace(config, batching_mode=mode)
    env = saturated_env(pool_size, easy_frac, hard_frac, cfg.responses_per_prompt, cfg.seed)
    ledger = sampler.AccuracyLedger()
    rng = make_rng(cfg.seed, 22)
    generated = discarded = rounds = 0
    per_step = []
    for _ in range(steps):
        acc = sampler.accumulate_update_batch(ledger, env.pool, cfg, env, rng)
        sampler.update_ledger(ledger, acc.all_groups)
        generated += acc.report.generated
        discarded += acc.report.discarded
        rounds += acc.report.rounds
        per_step.append(acc.report.waste_fraction)
    return {"mode": mode, "steps": steps, "generated": generated, "discarded": discarded,
            "rounds": rounds, "waste_fraction": discarded / generated, "per_step": per_step}


def waste_reduction(config: TrainConfig, steps: int = 100, **kw) -> tuple:
    """Relative waste reduction of capped batching over uniform sampling."""
    capped = waste_run(config, "caps", steps, **kw)
    uniform = waste_run(config, "uniform", steps, **kw)
    return 1.0 - capped["waste_fraction"] / uniform["waste_fraction"], capped, uniform
