"""Length-adaptive lambda and generalized advantage estimation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels


@dataclass(frozen=True)
class AdvantageResult:
    advantages: np.ndarray
    returns: np.ndarray


def lambda_actor(length: int, alpha: float) -> float:
    """``1 - 1/(alpha*length)`` clamped to [0, 1].

    Outputs shorter than ``1/alpha`` tokens would get a negative lambda;
    those fall back to one-step TD (lambda = 0).
    """
    if length < 1:
        raise ValueError(f"length must be >= 1, got {length}")
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    lam = 1.0 - 1.0 / (alpha * length)
    return min(max(lam, 0.0), 1.0)


def _check(rewards: np.ndarray, values: np.ndarray, gamma: float, lam: float):
    if rewards.ndim != 1 or values.ndim != 1:
        raise ValueError("rewards and values must be 1-D")
    if len(values) != len(rewards) + 1:
        raise ValueError(f"expected {len(rewards) + 1} values for {len(rewards)} rewards, got {len(values)}")
    if not (np.all(np.isfinite(rewards)) and np.all(np.isfinite(values))):
        raise ValueError("rewards and values must be finite")
    if values[-1] != 0:
        raise ValueError("terminal value must be 0")
    if not (0 < gamma <= 1):
        raise ValueError("gamma must be in (0, 1]")
    if not (0 <= lam <= 1):
        raise ValueError("lam must be in [0, 1]")


def gae(rewards, values, gamma: float, lam: float) -> AdvantageResult:
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    _check(rewards, values, gamma, lam)
    adv = kernels.gae_flat(rewards, values, np.array([0, len(rewards)]), gamma, np.array([lam]))
    return AdvantageResult(adv, adv + values[:-1])


def critic_targets(rewards, values, gamma: float) -> np.ndarray:
    """Lambda = 1 returns, i.e. discounted reward-to-go."""
    return gae(rewards, values, gamma, 1.0).returns


def gae_batch(rewards: Sequence[np.ndarray], values: Sequence[np.ndarray], gamma: float,
              lams: Sequence[float]) -> list:
    """GAE for many trajectories in a single kernel call; one lambda each."""
    if not (len(rewards) == len(values) == len(lams)):
        raise ValueError("rewards, values and lams must have one entry per trajectory")
    if not rewards:
        return []
    for r, v, lam in zip(rewards, values, lams):
        _check(np.asarray(r, dtype=np.float64), np.asarray(v, dtype=np.float64), gamma, lam)
    lengths = np.array([len(r) for r in rewards], dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(lengths)])
    r_flat = np.concatenate([np.asarray(r, dtype=np.float64) for r in rewards])
    v_flat = np.concatenate([np.asarray(v, dtype=np.float64) for v in values])
    adv = kernels.gae_flat(r_flat, v_flat, offsets, gamma, np.asarray(lams, dtype=np.float64))
    out = []
    for i, v in enumerate(values):
        a = adv[offsets[i]:offsets[i + 1]]
        out.append(AdvantageResult(a, a + np.asarray(v, dtype=np.float64)[:-1]))
    return out

