"""Batch builders shared by the unit and acceptance tests."""

import numpy as np

from rlcurate.core import TrainConfig, Trajectory
from rlcurate.toytrain import ToyPolicy, generate_bank

KINK_MARGIN = 1e-3


def plain_traj(logp_new, logp_old, adv, correct=True, qid="q"):
    logp_new = np.asarray(logp_new, dtype=float)
    return Trajectory(qid, np.zeros(len(logp_new), dtype=np.int64), logp_new, np.asarray(logp_old, float),
                      np.zeros(len(logp_new) + 1), 2.0 if correct else -1.5, correct,
                      advantages=np.asarray(adv, dtype=float))


def toy_gradient_case(seed, mu, eps_low=0.2, eps_high=0.28, n_questions=3, n=3):
    """A toy-policy batch whose loss is smooth in a neighbourhood of ``params``.

    Returns (policy, params, batch, config). logp_old is offset from the
    current log-probs so ratios spread over both clip branches; any token
    whose ratio sits within KINK_MARGIN of a clip boundary is nudged away so
    central differences never straddle a kink.
    """
    rng = np.random.default_rng(seed)
    cfg = TrainConfig(mu=mu, eps_low=eps_low, eps_high=eps_high, max_response_tokens=24,
                      tokens_per_op=2, format_dropout=0.0, temperature=float(rng.uniform(0.7, 1.5)))
    bank = generate_bank(30, (0.3, 0.4, 0.3), seed)
    policy = ToyPolicy(ToyPolicy.initial().params + rng.normal(scale=0.7, size=ToyPolicy.initial().shape),
                       cfg.temperature)
    qs = [bank.questions[i] for i in rng.choice(len(bank), n_questions, replace=False)]
    groups = policy.sample(qs, n, rng, cfg)
    trajs = [t for g in groups for t in g.trajectories]
    out = []
    for t in trajs:
        shift = rng.normal(scale=0.35, size=t.length)
        ratio = np.exp(shift)
        for bound in (1 - eps_low, 1 + eps_high):
            near = np.abs(ratio - bound) < KINK_MARGIN
            ratio[near] = bound + np.where(ratio[near] >= bound, 3, -3) * KINK_MARGIN
        adv = rng.normal(size=t.length)
        out.append(t.with_(logp_old=t.logp_new - np.log(ratio), advantages=adv,
                           is_correct=bool(rng.random() < 0.5)))
    return policy, policy.params.copy(), out, cfg


def vapo_at(policy, params, batch, cfg):
    from rlcurate.objective import vapo_loss

    lps = policy.log_probs(params, batch)
    return vapo_loss([t.with_(logp_new=lp) for t, lp in zip(batch, lps)], cfg).l_vapo


def finite_difference(policy, params, batch, cfg, h=1e-5):
    g = np.zeros_like(params)
    for idx in np.ndindex(params.shape):
        up, dn = params.copy(), params.copy()
        up[idx] += h
        dn[idx] -= h
        g[idx] = (vapo_at(policy, up, batch, cfg) - vapo_at(policy, dn, batch, cfg)) / (2 * h)
    return g


def relative_error(a, b, floor=1e-8):
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), np.linalg.norm(a), floor))
