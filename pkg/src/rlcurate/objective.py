"""Token-mean clipped PPO surrogate plus positive-example NLL.

All reductions concatenate tokens in batch order and use ``np.sum`` (pairwise
summation) so a given batch order always reduces to the same bits.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import Trajectory


class ObjectiveError(ValueError):
    pass


@dataclass(frozen=True)
class LossReport:
    l_ppo: float
    l_nll: float
    l_vapo: float
    n_tokens: int
    n_correct_tokens: int
    clip_fraction: float


def _offsets(batch: Sequence[Trajectory]) -> np.ndarray:
    return np.concatenate([[0], np.cumsum([t.length for t in batch])]).astype(np.int64)


def _locate(offsets: np.ndarray, flat_index: int) -> tuple:
    i = int(np.searchsorted(offsets, flat_index, side="right") - 1)
    return i, int(flat_index - offsets[i])


def _advantages(batch: Sequence[Trajectory]) -> np.ndarray:
    missing = [t.question_id for t in batch if t.advantages is None]
    if missing:
        raise ObjectiveError(f"trajectories without advantages: {missing[:3]}")
    return np.concatenate([np.asarray(t.advantages, dtype=np.float64) for t in batch])


def normalize_advantages(batch: Sequence[Trajectory], eps: float = 1e-8) -> list:
    """Whiten advantages over all tokens of the batch (off by default)."""
    adv = _advantages(batch)
    mean, std = adv.mean(), adv.std()
    offsets = _offsets(batch)
    return [t.with_(advantages=(adv[offsets[i]:offsets[i + 1]] - mean) / (std + eps))
            for i, t in enumerate(batch)]


def _ppo_terms(batch, eps_low, eps_high):
    if eps_low <= 0 or eps_high <= 0:
        raise ObjectiveError("clip ranges must be positive")
    if not batch:
        raise ObjectiveError("empty batch")
    offsets = _offsets(batch)
    logp_new = np.concatenate([t.logp_new for t in batch]).astype(np.float64)
    logp_old = np.concatenate([t.logp_old for t in batch]).astype(np.float64)
    adv = _advantages(batch)
    if len(adv) != len(logp_new):
        raise ObjectiveError("advantages and log-probs differ in length")
    with np.errstate(over="ignore", invalid="ignore"):
        ratio = np.exp(logp_new - logp_old)
    bad = np.flatnonzero(~np.isfinite(ratio))
    if bad.size:
        i, pos = _locate(offsets, bad[0])
        raise ObjectiveError(
            f"non-finite probability ratio in trajectory {i} ({batch[i].question_id!r}) at position {pos}")
    clipped_ratio = np.clip(ratio, 1.0 - eps_low, 1.0 + eps_high)
    unclipped = ratio * adv
    clipped = clipped_ratio * adv
    # ties resolve to the unclipped branch
    use_clip = clipped < unclipped
    surrogate = np.where(use_clip, clipped, unclipped)
    return ratio, adv, surrogate, use_clip


def ppo_loss(batch: Sequence[Trajectory], eps_low: float = 0.2, eps_high: float = 0.28) -> float:
    _, _, surrogate, _ = _ppo_terms(batch, eps_low, eps_high)
    return float(-np.sum(surrogate) / len(surrogate))


def nll_loss(batch: Sequence[Trajectory]) -> float:
    correct = [t.logp_new for t in batch if t.is_correct]
    n = sum(len(x) for x in correct)
    if n == 0:
        return 0.0
    return float(-np.sum(np.concatenate(correct)) / n)


def vapo_loss(batch: Sequence[Trajectory], config) -> LossReport:
    if getattr(config, "normalize_advantages", False):
        batch = normalize_advantages(batch)
    _, _, surrogate, use_clip = _ppo_terms(batch, config.eps_low, config.eps_high)
    l_ppo = float(-np.sum(surrogate) / len(surrogate))
    l_nll = nll_loss(batch)
    return LossReport(
        l_ppo=l_ppo,
        l_nll=l_nll,
        l_vapo=l_ppo + config.mu * l_nll,
        n_tokens=len(surrogate),
        n_correct_tokens=sum(t.length for t in batch if t.is_correct),
        clip_fraction=float(np.mean(use_clip)) if len(use_clip) else 0.0,
    )


def token_coefficients(batch: Sequence[Trajectory], config) -> np.ndarray:
    """d l_vapo / d logp_new for every token, advantages and logp_old held fixed."""
    if getattr(config, "normalize_advantages", False):
        batch = normalize_advantages(batch)
    ratio, adv, _, use_clip = _ppo_terms(batch, config.eps_low, config.eps_high)
    n = len(ratio)
    coef = np.where(use_clip, 0.0, -adv * ratio / n)
    n_correct = sum(t.length for t in batch if t.is_correct)
    if n_correct and config.mu:
        correct = np.concatenate([np.full(t.length, t.is_correct) for t in batch])
        coef = coef - config.mu * correct / n_correct
    return coef


def policy_gradient(batch: Sequence[Trajectory], policy, params: np.ndarray, config) -> np.ndarray:
    """Exact gradient of ``vapo_loss`` w.r.t. ``params``.

    ``batch`` must carry ``logp_new`` evaluated at ``params``; ``policy``
    supplies the chain rule through ``logp_grad(params, batch, coef)``.
    """
    params = np.asarray(params, dtype=np.float64)
    coef = token_coefficients(batch, config)
    grad = policy.logp_grad(params, batch, coef)
    if grad.shape != params.shape:
        raise ObjectiveError(f"gradient shape {grad.shape} does not match params {params.shape}")
    return grad


def value_loss(values_pred, critic_targets) -> float:
    pred = np.asarray(values_pred, dtype=np.float64)
    target = np.asarray(critic_targets, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"length mismatch: {pred.shape} vs {target.shape}")
    if pred.size == 0:
        return 0.0
    d = pred - target
    return float(np.sum(d * d) / d.size)
