"""Hot loops, each with a numba and a pure-numpy implementation.

The numba path is used when numba imports and ``RLCURATE_NO_NUMBA`` is not
set to a truthy value. Both paths take identical inputs (including any
pre-drawn uniforms) so they can be swapped freely and benchmarked against
each other; ``BACKENDS`` exposes both regardless of which one is active.
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is optional
    numba = None

HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and os.environ.get("RLCURATE_NO_NUMBA", "").strip().lower() not in ("1", "true", "yes", "on")

MERSENNE_61 = np.uint64((1 << 61) - 1)

# toy policy vocabulary
T_OPEN, BOX_DIRECT, WORK_EN, WORK_CN, T_CLOSE, BOX, BARE = range(7)
VOCAB = 7
PH_START, PH_REASON, PH_ANSWER, PH_FORCED = range(4)
# rows: phase code, columns: token id
PHASE_MASK = np.array([
    [1, 1, 0, 0, 0, 0, 0],
    [0, 0, 1, 1, 1, 0, 0],
    [0, 0, 0, 0, 0, 1, 1],
    [0, 0, 0, 0, 1, 0, 0],
], dtype=np.bool_)
# feature layout: bias | tier (3) | remaining-work bucket (6) | previous language (3)
F_BIAS, F_TIER, F_REM, F_LANG = 0, 1, 4, 10
N_FEATURES = 13
REM_EDGES = np.array([0, 2, 4, 8, 16], dtype=np.int64)


# ---------------------------------------------------------------- GAE

def _gae_loop(rewards, values, offsets, gamma, lams):
    n = offsets.shape[0] - 1
    adv = np.empty(rewards.shape[0], dtype=np.float64)
    for i in range(n):
        start = offsets[i]
        stop = offsets[i + 1]
        vstart = start + i  # each trajectory carries one extra (terminal) value
        gl = gamma * lams[i]
        running = 0.0
        for t in range(stop - start - 1, -1, -1):
            delta = rewards[start + t] + gamma * values[vstart + t + 1] - values[vstart + t]
            running = delta + gl * running
            adv[start + t] = running
    return adv


def _gae_numpy(rewards, values, offsets, gamma, lams):
    lengths = np.diff(offsets)
    n = lengths.shape[0]
    adv = np.empty(rewards.shape[0], dtype=np.float64)
    if n == 0:
        return adv
    lmax = int(lengths.max())
    pos = np.arange(lmax)
    valid = pos[None, :] < lengths[:, None]
    r = np.zeros((n, lmax))
    v = np.zeros((n, lmax + 1))
    r[valid] = rewards
    vvalid = np.arange(lmax + 1)[None, :] < (lengths + 1)[:, None]
    v[vvalid] = values
    gl = gamma * np.asarray(lams, dtype=np.float64)
    running = np.zeros(n)
    out = np.zeros((n, lmax))
    for t in range(lmax - 1, -1, -1):
        delta = r[:, t] + gamma * v[:, t + 1] - v[:, t]
        running = np.where(valid[:, t], delta + gl * running, 0.0)
        out[:, t] = running
    adv[:] = out[valid]
    return adv


# ---------------------------------------------------------------- MinHash

def _affine61(a, x, b):
    """(a*x + b) mod (2**61 - 1) for a, b < 2**61 and x < 2**32, without overflow.

    a is split at bit 32; the high product is shifted using 2**61 = 1 (mod p).
    """
    p = np.uint64(2305843009213693951)
    a_hi = a >> np.uint64(32)
    a_lo = a & np.uint64(0xFFFFFFFF)
    t1 = a_hi * x
    t2 = a_lo * x
    s = ((t1 >> np.uint64(29)) + ((t1 & np.uint64(0x1FFFFFFF)) << np.uint64(32))
         + (t2 & p) + (t2 >> np.uint64(61)) + b)
    s = (s & p) + (s >> np.uint64(61))
    if s >= p:
        s -= p
    return s


def _minhash_loop(hashes, a, b):
    p = np.uint64(2305843009213693951)
    k = a.shape[0]
    sig = np.empty(k, dtype=np.uint64)
    for i in range(k):
        best = p
        ai = a[i]
        bi = b[i]
        for j in range(hashes.shape[0]):
            h = _affine61(ai, hashes[j], bi)
            if h < best:
                best = h
        sig[i] = best
    return sig


def _affine61_numpy(a, x, b):
    p = MERSENNE_61
    t1 = (a >> np.uint64(32))[:, None] * x[None, :]
    t2 = (a & np.uint64(0xFFFFFFFF))[:, None] * x[None, :]
    s = ((t1 >> np.uint64(29)) + ((t1 & np.uint64(0x1FFFFFFF)) << np.uint64(32))
         + (t2 & p) + (t2 >> np.uint64(61)) + b[:, None])
    s = (s & p) + (s >> np.uint64(61))
    return np.where(s >= p, s - p, s)


def _minhash_numpy(hashes, a, b, chunk=1024):
    sig = np.full(a.shape[0], MERSENNE_61, dtype=np.uint64)
    for s in range(0, hashes.shape[0], chunk):
        h = _affine61_numpy(a, hashes[s:s + chunk], b)
        np.minimum(sig, h.min(axis=1), out=sig)
    return sig


# ---------------------------------------------------------------- toy decoding

def _rem_bucket(rem):
    if rem <= 0:
        return 0
    if rem <= 2:
        return 1
    if rem <= 4:
        return 2
    if rem <= 8:
        return 3
    if rem <= 16:
        return 4
    return 5


def _decode_loop(W, inv_temp, tiers, needed, uniforms, max_reason, phase_mask):
    B, L = uniforms.shape
    actions = np.full((B, L), -1, dtype=np.int64)
    logp = np.zeros((B, L), dtype=np.float64)
    phases = np.zeros((B, L), dtype=np.int64)
    rems = np.zeros((B, L), dtype=np.int64)
    langs = np.zeros((B, L), dtype=np.int64)
    lengths = np.zeros(B, dtype=np.int64)
    progress = np.zeros(B, dtype=np.int64)
    logits = np.empty(7, dtype=np.float64)
    for bi in range(B):
        phase = 0
        prog = 0
        lang = 0
        n_reason = 0
        tier = tiers[bi]
        for t in range(L):
            if phase == 1 and n_reason >= max_reason:
                phase = 3
            rb = _rem_bucket(needed[bi] - prog)
            best = -1e300
            for a in range(7):
                if phase_mask[phase, a]:
                    z = (W[0, a] + W[1 + tier, a] + W[4 + rb, a] + W[10 + lang, a]) * inv_temp
                    logits[a] = z
                    if z > best:
                        best = z
            total = 0.0
            for a in range(7):
                if phase_mask[phase, a]:
                    total += np.exp(logits[a] - best)
            u = uniforms[bi, t] * total
            cum = 0.0
            pick = -1
            for a in range(7):
                if phase_mask[phase, a]:
                    cum += np.exp(logits[a] - best)
                    pick = a
                    if cum > u:
                        break
            actions[bi, t] = pick
            logp[bi, t] = logits[pick] - best - np.log(total)
            phases[bi, t] = phase
            rems[bi, t] = rb
            langs[bi, t] = lang
            done = False
            if phase == 0:
                if pick == 0:
                    phase = 1
                else:
                    done = True
            elif phase == 1 or phase == 3:
                if pick == 4:
                    phase = 2
                else:
                    prog += 1
                    n_reason += 1
                    lang = 1 if pick == 2 else 2
            else:
                done = True
            if done:
                lengths[bi] = t + 1
                break
        progress[bi] = prog
    return actions, logp, phases, rems, langs, lengths, progress


def _decode_numpy(W, inv_temp, tiers, needed, uniforms, max_reason, phase_mask):
    B, L = uniforms.shape
    actions = np.full((B, L), -1, dtype=np.int64)
    logp = np.zeros((B, L))
    phases = np.zeros((B, L), dtype=np.int64)
    rems = np.zeros((B, L), dtype=np.int64)
    langs = np.zeros((B, L), dtype=np.int64)
    lengths = np.zeros(B, dtype=np.int64)
    phase = np.zeros(B, dtype=np.int64)
    prog = np.zeros(B, dtype=np.int64)
    lang = np.zeros(B, dtype=np.int64)
    n_reason = np.zeros(B, dtype=np.int64)
    active = np.ones(B, dtype=bool)
    rows = np.arange(B)
    for t in range(L):
        if not active.any():
            break
        phase = np.where((phase == PH_REASON) & (n_reason >= max_reason), PH_FORCED, phase)
        rb = np.searchsorted(REM_EDGES, needed - prog, side="left")
        z = (W[0][None, :] + W[1 + tiers] + W[4 + rb] + W[10 + lang]) * inv_temp
        mask = phase_mask[phase]
        z = np.where(mask, z, -np.inf)
        best = z.max(axis=1)
        e = np.where(mask, np.exp(z - best[:, None]), 0.0)
        total = e.sum(axis=1)
        cum = np.cumsum(e, axis=1)
        u = uniforms[:, t] * total
        # first valid index whose cumulative mass exceeds u, else last valid
        hit = mask & (cum > u[:, None])
        last_valid = VOCAB - 1 - np.argmax(mask[:, ::-1], axis=1)
        pick = np.where(hit.any(axis=1), np.argmax(hit, axis=1), last_valid)
        lp = z[rows, pick] - best - np.log(total)

        idx = rows[active]
        actions[idx, t] = pick[idx]
        logp[idx, t] = lp[idx]
        phases[idx, t] = phase[idx]
        rems[idx, t] = rb[idx]
        langs[idx, t] = lang[idx]

        reasoning = (phase == PH_REASON) | (phase == PH_FORCED)
        work = reasoning & (pick != T_CLOSE)
        ends = ((phase == PH_START) & (pick == BOX_DIRECT)) | (phase == PH_ANSWER)
        new_phase = phase.copy()
        new_phase[(phase == PH_START) & (pick == T_OPEN)] = PH_REASON
        new_phase[reasoning & (pick == T_CLOSE)] = PH_ANSWER
        upd = active & work
        prog = np.where(upd, prog + 1, prog)
        n_reason = np.where(upd, n_reason + 1, n_reason)
        lang = np.where(upd, np.where(pick == WORK_EN, 1, 2), lang)
        finishing = active & ends
        lengths[finishing] = t + 1
        phase = np.where(active, new_phase, phase)
        active = active & ~ends
    return actions, logp, phases, rems, langs, lengths, prog


if HAVE_NUMBA:
    _gae_numba = numba.njit(cache=True, nogil=True)(_gae_loop)
    # rebinding lets the jitted kernels resolve helpers as compiled functions
    _affine61 = numba.njit(cache=True, nogil=True)(_affine61)
    _minhash_numba = numba.njit(cache=True, nogil=True)(_minhash_loop)
    _rem_bucket = numba.njit(cache=True, nogil=True)(_rem_bucket)
    _decode_numba = numba.njit(cache=True, nogil=True)(_decode_loop)
else:  # pragma: no cover
    _gae_numba = _minhash_numba = _decode_numba = None

BACKENDS = {
    "numpy": {"gae": _gae_numpy, "minhash": _minhash_numpy, "decode": _decode_numpy},
}
if HAVE_NUMBA:
    BACKENDS["numba"] = {"gae": _gae_numba, "minhash": _minhash_numba, "decode": _decode_numba}

ACTIVE_BACKEND = "numba" if USE_NUMBA else "numpy"


def gae_flat(rewards, values, offsets, gamma, lams):
    """Backward-recursion GAE over trajectories concatenated end to end."""
    return BACKENDS[ACTIVE_BACKEND]["gae"](
        np.ascontiguousarray(rewards, dtype=np.float64),
        np.ascontiguousarray(values, dtype=np.float64),
        np.ascontiguousarray(offsets, dtype=np.int64),
        float(gamma),
        np.ascontiguousarray(lams, dtype=np.float64),
    )


def minhash(hashes, a, b):
    return BACKENDS[ACTIVE_BACKEND]["minhash"](
        np.ascontiguousarray(hashes, dtype=np.uint64), a, b)


def decode(W, temperature, tiers, needed, uniforms, max_reason):
    return BACKENDS[ACTIVE_BACKEND]["decode"](
        np.ascontiguousarray(W, dtype=np.float64),
        1.0 / float(temperature),
        np.ascontiguousarray(tiers, dtype=np.int64),
        np.ascontiguousarray(needed, dtype=np.int64),
        np.ascontiguousarray(uniforms, dtype=np.float64),
        int(max_reason),
        PHASE_MASK,
    )
