"""Parity between the numba and numpy kernel backends."""

import numpy as np
import pytest

from rlcurate import kernels
from rlcurate.curation.minhash import permutation_params
from rlcurate.toytrain.policy import ToyPolicy

from oracles import minhash_bigint

needs_both = pytest.mark.skipif("numba" not in kernels.BACKENDS, reason="numba not installed")


def test_backend_flag_names_a_backend():
    assert kernels.ACTIVE_BACKEND in kernels.BACKENDS


def test_minhash_matches_bigint_oracle(backend, rng):
    a = rng.integers(1, (1 << 61) - 1, 64, dtype=np.uint64)
    b = rng.integers(0, (1 << 61) - 1, 64, dtype=np.uint64)
    x = rng.integers(0, 1 << 32, 300, dtype=np.uint64)
    # extremes of every operand range
    a[0], b[0], x[0] = (1 << 61) - 2, (1 << 61) - 2, (1 << 32) - 1
    got = kernels.BACKENDS[backend]["minhash"](x, a, b)
    assert got.tolist() == minhash_bigint(x, a, b)


@needs_both
def test_gae_backends_identical(rng):
    lengths = rng.integers(1, 40, 50)
    offsets = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)
    r = rng.normal(size=offsets[-1])
    v = np.zeros(offsets[-1] + 50)
    for i, (s, e) in enumerate(zip(offsets[:-1], offsets[1:])):
        v[s + i:e + i] = rng.normal(size=e - s)
    lams = rng.uniform(0, 1, 50)
    outs = [kernels.BACKENDS[b]["gae"](r, v, offsets, 0.97, lams) for b in ("numpy", "numba")]
    assert np.array_equal(outs[0], outs[1])


@needs_both
def test_decode_backends_agree(rng):
    W = ToyPolicy.initial().params + rng.normal(scale=0.5, size=(kernels.N_FEATURES, kernels.VOCAB))
    tiers = rng.integers(0, 3, 200)
    needed = rng.choice([6, 12, 18, 24, 30], 200)
    u = rng.random((200, 64))
    a = kernels.BACKENDS["numpy"]["decode"](W, 1.0, tiers, needed, u, 61, kernels.PHASE_MASK)
    b = kernels.BACKENDS["numba"]["decode"](W, 1.0, tiers, needed, u, 61, kernels.PHASE_MASK)
    for k, (x, y) in enumerate(zip(a, b)):
        if x.dtype.kind == "f":
            assert np.max(np.abs(x - y)) < 1e-12, k
        else:
            assert np.array_equal(x, y), k


@needs_both
def test_minhash_signatures_identical_across_backends(rng):
    a, b = permutation_params(3, 256)
    x = rng.integers(0, 1 << 32, 1000, dtype=np.uint64)
    assert np.array_equal(kernels.BACKENDS["numpy"]["minhash"](x, a, b),
                          kernels.BACKENDS["numba"]["minhash"](x, a, b))
