"""Tabular value estimator keyed by (tier, response-position bucket)."""

from __future__ import annotations

import numpy as np

from ..objective import value_loss


class ValueEstimator:
    def __init__(self, n_tiers=3, n_buckets=25, bucket_width=2, lr=0.5, table=None):
        self.n_tiers = n_tiers
        self.n_buckets = n_buckets
        self.bucket_width = bucket_width
        self.lr = lr
        self.table = np.zeros((n_tiers, n_buckets)) if table is None else np.array(table, dtype=np.float64)
        if self.table.shape != (n_tiers, n_buckets):
            raise ValueError(f"value table shape {self.table.shape} != {(n_tiers, n_buckets)}")

    @classmethod
    def for_config(cls, config):
        n_buckets = -(-config.max_response_tokens // config.value_bucket_width)
        return cls(3, n_buckets, config.value_bucket_width, config.value_lr)

    def keys(self, tier: int, length: int) -> np.ndarray:
        buckets = np.minimum(np.arange(length) // self.bucket_width, self.n_buckets - 1)
        return tier * self.n_buckets + buckets

    def predict(self, keys) -> np.ndarray:
        """Per-position values with the terminal value (0) appended."""
        return np.concatenate([self.table.ravel()[keys], [0.0]])

    def loss(self, batch) -> float:
        keys = np.concatenate([t.value_keys for t in batch])
        targets = np.concatenate([t.returns for t in batch])
        return value_loss(self.table.ravel()[keys], targets)

    def fit(self, batch) -> float:
        """One gradient step on the token-mean squared error.

        The step for each cell is scaled by that cell's curvature, so
        ``lr=1`` jumps straight to the cell's mean target. Returns the loss
        before the step.
        """
        keys = np.concatenate([t.value_keys for t in batch])
        targets = np.concatenate([t.returns for t in batch])
        flat = self.table.ravel()
        pred = flat[keys]
        before = value_loss(pred, targets)
        n = len(keys)
        grad = np.bincount(keys, weights=2.0 * (pred - targets) / n, minlength=flat.size)
        curv = np.bincount(keys, minlength=flat.size) * 2.0 / n
        step = np.divide(grad, curv, out=np.zeros_like(grad), where=curv > 0)
        self.table = (flat - self.lr * step).reshape(self.table.shape)
        return before
