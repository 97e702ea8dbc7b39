"""Critic warmup, balanced rollout, GAE, clipped update, ledger update."""

from __future__ import annotations

import json
import logging

import numpy as np

from .. import sampler
from ..advantage import gae_batch, lambda_actor
from ..core import TrainConfig, dump_config, make_rng, parse_config
from ..objective import policy_gradient, vapo_loss
from .bank import ToyQuestionBank
from .policy import ToyPolicy
from .value import ValueEstimator

log = logging.getLogger(__name__)

CHECKPOINT_KIND = "rlcurate-checkpoint"


class CheckpointError(ValueError):
    def __init__(self, message, offset):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


def attach_advantages(batch, config):
    """Actor advantages use a per-trajectory length-adaptive lambda; critic
    targets use lambda = 1."""
    rewards = []
    for t in batch:
        r = np.zeros(t.length)
        r[-1] = t.terminal_reward
        rewards.append(r)
    values = [t.values for t in batch]
    lams = [lambda_actor(t.length, config.alpha) for t in batch]
    actor = gae_batch(rewards, values, config.gamma, lams)
    critic = gae_batch(rewards, values, config.gamma, [1.0] * len(batch))
    return [t.with_(advantages=a.advantages, returns=c.returns) for t, a, c in zip(batch, actor, critic)]


class Trainer:
    def __init__(self, config: TrainConfig, bank: ToyQuestionBank):
        if len(bank) == 0:
            raise ValueError("question bank is empty")
        self.config = config
        self.bank = bank
        self.questions = bank.lookup()
        self.pool = bank.ids
        self.policy = ToyPolicy.initial(config.temperature)
        self.value = ValueEstimator.for_config(config)
        self.ledger = sampler.AccuracyLedger()
        self.rng = make_rng(config.seed, 1)
        self.step_count = 0
        self.warmed_up = config.critic_warmup_steps == 0

    # ------------------------------------------------------------ pieces

    def rollout_fn(self, plan):
        qs = [self.questions[q] for q in plan.question_ids]
        return self.policy.sample(qs, self.config.responses_per_prompt, self.rng, self.config, self.value)

    def warmup(self):
        """Critic-only steps; policy parameters are not touched."""
        cfg = self.config
        for _ in range(cfg.critic_warmup_steps):
            plan = sampler.build_rollout_batch(self.ledger, self.pool, cfg.prompts_per_batch, cfg, self.rng)
            groups = self.rollout_fn(plan)
            batch = attach_advantages([t for g in groups for t in g.trajectories], cfg)
            self.value.fit(batch)
            sampler.update_ledger(self.ledger, groups)
        self.warmed_up = True

    def step(self) -> dict:
        cfg = self.config
        acc = sampler.accumulate_update_batch(self.ledger, self.pool, cfg, self.rollout_fn, self.rng)
        generated = [t for g in acc.all_groups for t in g.trajectories]
        batch = attach_advantages([t for g in acc.groups for t in g.trajectories], cfg)

        params = self.policy.params.copy()
        report = None
        for _ in range(cfg.ppo_epochs):
            lps = self.policy.log_probs(params, batch)
            batch = [t.with_(logp_new=lp) for t, lp in zip(batch, lps)]
            report = vapo_loss(batch, cfg)
            grad = policy_gradient(batch, self.policy, params, cfg)
            params = params - cfg.policy_lr * grad
        self.policy.params = params

        v_loss = self.value.fit(batch)
        sampler.update_ledger(self.ledger, acc.all_groups)
        self.step_count += 1
        return {
            "step": self.step_count,
            "mean_reward": float(np.mean([t.terminal_reward for t in generated])),
            "mean_accuracy": float(np.mean([t.is_correct for t in generated])),
            "mean_length": float(np.mean([t.length for t in batch])),
            "l_ppo": report.l_ppo,
            "l_nll": report.l_nll,
            "l_vapo": report.l_vapo,
            "clip_fraction": report.clip_fraction,
            "value_loss": v_loss,
            "waste_fraction": acc.report.waste_fraction,
            "rounds": acc.report.rounds,
            "update_groups": len(acc.groups),
        }

    def run(self, steps, on_metrics=None) -> list:
        log_ = []
        if steps <= 0:
            return log_
        if not self.warmed_up:
            self.warmup()
        for _ in range(steps):
            m = self.step()
            log_.append(m)
            if on_metrics is not None:
                on_metrics(m)
        return log_

    # ------------------------------------------------------------ checkpoints

    def save(self, path):
        lines = [
            {"kind": CHECKPOINT_KIND, "version": 1, "step": self.step_count, "warmed_up": self.warmed_up,
             "config": dump_config(self.config), "bank_size": len(self.bank)},
            {"policy": self.policy.params.tolist()},
            {"value": self.value.table.tolist()},
            {"rng": self.rng.bit_generator.state},
        ]
        lines += [{"ledger": rec} for rec in self.ledger.to_records()]
        lines.append({"end": len(lines) + 1})
        with open(path, "w", encoding="utf-8") as fh:
            for rec in lines:
                fh.write(json.dumps(rec, ensure_ascii=False) + "\n")

    @classmethod
    def load(cls, path, bank, config=None):
        ck = read_checkpoint(path)
        cfg = config or parse_config(ck["config"])
        tr = cls(cfg, bank)
        policy = np.array(ck["policy"], dtype=np.float64)
        if policy.shape != tr.policy.params.shape:
            raise CheckpointError("policy shape mismatch", 0)
        tr.policy.params = policy
        tr.value = ValueEstimator(tr.value.n_tiers, tr.value.n_buckets, tr.value.bucket_width,
                                  cfg.value_lr, table=ck["value"])
        tr.rng.bit_generator.state = ck["rng"]
        tr.ledger = sampler.AccuracyLedger.from_records(ck["ledger"])
        tr.step_count = ck["step"]
        tr.warmed_up = ck["warmed_up"]
        return tr


def read_checkpoint(path) -> dict:
    """Parse and validate a checkpoint; truncation raises CheckpointError."""
    out = {"ledger": []}
    offset = 0
    n_lines = 0
    ended = False
    with open(path, "rb") as fh:
        for raw in fh:
            if ended:
                raise CheckpointError("data after end marker", offset)
            try:
                rec = json.loads(raw.decode("utf-8"))
            except (UnicodeDecodeError, json.JSONDecodeError):
                raise CheckpointError("unreadable checkpoint line", offset) from None
            if not raw.endswith(b"\n"):
                raise CheckpointError("truncated checkpoint line", offset)
            n_lines += 1
            if n_lines == 1:
                if rec.get("kind") != CHECKPOINT_KIND:
                    raise CheckpointError("not a checkpoint", offset)
                out.update(step=rec["step"], warmed_up=rec["warmed_up"], config=rec["config"],
                           bank_size=rec.get("bank_size"))
            elif "ledger" in rec:
                out["ledger"].append(rec["ledger"])
            elif "end" in rec:
                if rec["end"] != n_lines:
                    raise CheckpointError("line count mismatch", offset)
                ended = True
            else:
                out.update(rec)
            offset += len(raw)
    if not ended:
        raise CheckpointError("checkpoint truncated before end marker", offset)
    for key in ("policy", "value", "rng"):
        if key not in out:
            raise CheckpointError(f"checkpoint missing {key!r}", offset)
    return out


def train(config: TrainConfig, bank: ToyQuestionBank, steps: int) -> list:
    return Trainer(config, bank).run(steps)
