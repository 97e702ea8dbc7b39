"""Log-linear toy policy over a seven-token response grammar.

A response is ``<think>`` followed by work tokens (English or Chinese
wording), ``</think>`` and a boxed answer. Every ``tokens_per_op`` work
tokens complete one arithmetic operation; the boxed value is the running
result, so stopping early yields a wrong answer. Skipping ``<think>`` or the
box breaks the format, and mixing wordings trips the language check.

logits(s) = W.T @ phi(s) / temperature, restricted to the tokens valid in
the current phase. phi(s) one-hot encodes tier, remaining work and the
previous work token's language, plus a bias.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .. import kernels, reward
from ..core import RolloutGroup, Trajectory
from ..kernels import (BARE, BOX, BOX_DIRECT, F_LANG, F_REM, F_TIER, N_FEATURES, PHASE_MASK,
                       T_CLOSE, T_OPEN, VOCAB, WORK_CN, WORK_EN)

WORD_EN = "calc"
WORD_CN = "计算推演"
TOKEN_NAMES = ("<think>", "boxed-direct", "work-en", "work-cn", "</think>", "boxed", "bare")


def features(tiers, rems, langs) -> np.ndarray:
    tiers, rems, langs = (np.asarray(x, dtype=np.int64) for x in (tiers, rems, langs))
    phi = np.zeros((len(tiers), N_FEATURES))
    rows = np.arange(len(tiers))
    phi[:, 0] = 1.0
    phi[rows, F_TIER + tiers] = 1.0
    phi[rows, F_REM + rems] = 1.0
    phi[rows, F_LANG + langs] = 1.0
    return phi


@dataclass
class ToyPolicy:
    params: np.ndarray
    temperature: float = 1.0

    @classmethod
    def initial(cls, temperature=1.0, prior=True):
        """Zero weights, optionally with a warm-start bias.

        The bias stands in for a supervised warm start: the skeleton is
        usually followed and reasoning rarely stops after one token.
        """
        W = np.zeros((N_FEATURES, VOCAB))
        if prior:
            W[0, T_OPEN] = 1.0
            W[0, BOX] = 1.0
            W[0, T_CLOSE] = -2.5
        return cls(W, temperature)

    @property
    def shape(self):
        return self.params.shape

    # ------------------------------------------------------------ scoring

    def _flatten(self, batch):
        phi = np.concatenate([t.features for t in batch])
        mask = np.concatenate([t.action_mask for t in batch])
        actions = np.concatenate([t.tokens for t in batch]).astype(np.int64)
        offsets = np.concatenate([[0], np.cumsum([t.length for t in batch])]).astype(np.int64)
        return phi, mask, actions, offsets

    def _probs(self, params, phi, mask):
        z = (phi @ params) / self.temperature
        z = np.where(mask, z, -np.inf)
        z = z - z.max(axis=1, keepdims=True)
        e = np.where(mask, np.exp(z), 0.0)
        total = e.sum(axis=1, keepdims=True)
        return z - np.log(total), e / total

    def log_probs(self, params, batch) -> list:
        phi, mask, actions, offsets = self._flatten(batch)
        logits, _ = self._probs(params, phi, mask)
        lp = logits[np.arange(len(actions)), actions]
        return [lp[offsets[i]:offsets[i + 1]] for i in range(len(batch))]

    def logp_grad(self, params, batch, coef) -> np.ndarray:
        """Gradient of sum_t coef[t] * log pi(a_t | s_t) w.r.t. params."""
        phi, mask, actions, _ = self._flatten(batch)
        _, probs = self._probs(params, phi, mask)
        delta = -probs
        delta[np.arange(len(actions)), actions] += 1.0
        return phi.T @ (np.asarray(coef)[:, None] * delta) / self.temperature

    # ------------------------------------------------------------ sampling

    def sample(self, questions, n, rng, config, value=None) -> list:
        """Roll out ``n`` responses per question; returns one RolloutGroup each."""
        B = len(questions) * n
        max_reason = config.max_response_tokens - 3
        L = config.max_response_tokens
        tiers = np.repeat([q.tier for q in questions], n)
        needed = np.repeat([q.n_ops * config.tokens_per_op for q in questions], n)
        uniforms = rng.random((B, L))
        drop = rng.random(B)
        workers = max(1, int(getattr(config, "workers", 1)))
        if workers > 1 and B > 1:
            chunks = np.array_split(np.arange(B), workers)
            with ThreadPoolExecutor(workers) as pool:
                parts = list(pool.map(lambda idx: kernels.decode(
                    self.params, self.temperature, tiers[idx], needed[idx], uniforms[idx], max_reason), chunks))
            out = [np.concatenate([p[k] for p in parts]) for k in range(7)]
        else:
            out = kernels.decode(self.params, self.temperature, tiers, needed, uniforms, max_reason)
        actions, logp, phases, rems, langs, lengths, progress = out
        groups = []
        for qi, q in enumerate(questions):
            trajs = []
            for j in range(n):
                b = qi * n + j
                ln = int(lengths[b])
                toks = actions[b, :ln].copy()
                text = render(q, toks, config.tokens_per_op, drop[b] < config.format_dropout)
                rb = reward.score(text, q.question.reference_answer, q.question.answer_kind, config.k_lang,
                                  question_id=q.id)
                phi = features(np.full(ln, q.tier), rems[b, :ln], langs[b, :ln])
                keys = value.keys(q.tier, ln) if value is not None else None
                vals = value.predict(keys) if value is not None else np.zeros(ln + 1)
                lp = logp[b, :ln].copy()
                trajs.append(Trajectory(
                    question_id=q.id, tokens=toks, logp_new=lp, logp_old=lp.copy(), values=vals,
                    terminal_reward=rb.total, is_correct=rb.answer_ok, features=phi,
                    action_mask=PHASE_MASK[phases[b, :ln]], value_keys=keys, reward=rb, text=text))
            groups.append(RolloutGroup(q.id, tuple(trajs)))
        return groups


def render(question, tokens, tokens_per_op, drop_close=False) -> str:
    vals = question.partials
    parts = []
    progress = 0
    tail = ""
    for tok in tokens:
        if tok == T_OPEN:
            parts.append("<think>")
        elif tok in (WORK_EN, WORK_CN):
            parts.append(WORD_EN if tok == WORK_EN else WORD_CN)
            progress += 1
            k, rem = divmod(progress, tokens_per_op)
            if rem == 0 and 1 <= k <= question.n_ops:
                op = question.operators[k - 1]
                parts.append(f"{vals[k - 1]} {op} {question.operands[k]} = {vals[k]}")
        elif tok == T_CLOSE:
            if not drop_close:
                parts.append("</think>")
        else:
            value = vals[min(progress // tokens_per_op, question.n_ops)]
            if tok in (BOX, BOX_DIRECT):
                tail = f"\\boxed{{{value}}}"
            elif tok == BARE:
                tail = str(value)
    body = " ".join(parts)
    return f"{body} {tail}".strip()


def rollout(policy, value, question, n, rng, config) -> RolloutGroup:
    if n < 1:
        raise ValueError("n must be >= 1")
    return policy.sample([question], n, rng, config, value)[0]
