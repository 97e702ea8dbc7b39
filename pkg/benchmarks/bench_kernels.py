"""Time the numba and numpy kernel backends on representative workloads.

    python3 benchmarks/bench_kernels.py --repeat 5
"""

import argparse
import time

import numpy as np

from rlcurate import kernels
from rlcurate.curation.minhash import permutation_params
from rlcurate.toytrain.policy import ToyPolicy


def gae_case(rng, n_traj=1024, max_len=64):
    lengths = rng.integers(1, max_len + 1, n_traj)
    offsets = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)
    rewards = rng.normal(size=offsets[-1])
    values = np.zeros(offsets[-1] + n_traj)
    lams = rng.uniform(0.5, 1.0, n_traj)
    return rewards, values, offsets, 1.0, lams


def minhash_case(rng, n_shingles=2000):
    hashes = rng.integers(0, 1 << 32, n_shingles, dtype=np.uint64)
    a, b = permutation_params(0, 256)
    return hashes, a, b


def decode_case(rng, batch=256, length=64):
    W = ToyPolicy.initial().params
    tiers = rng.integers(0, 3, batch)
    needed = rng.choice([6, 12, 18, 24, 30], batch)
    return W, 1.0, tiers, needed, rng.random((batch, length)), length - 3, kernels.PHASE_MASK


def best_of(fn, args, repeat):
    fn(*args)  # compile / warm caches
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    cases = {"gae": gae_case(rng), "minhash": minhash_case(rng), "decode": decode_case(rng)}
    backends = [b for b in ("numpy", "numba") if b in kernels.BACKENDS]
    print(f"{'kernel':<10}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}")
    for name, case in cases.items():
        t = {b: best_of(kernels.BACKENDS[b][name], case, args.repeat) for b in backends}
        speed = f"{t['numpy'] / t['numba']:>9.1f}x" if "numba" in t else ""
        print(f"{name:<10}" + "".join(f"{t[b] * 1e3:>10.2f}ms" for b in backends) + speed)


if __name__ == "__main__":
    main()
