import numpy as np
import pytest
from hypothesis import given, strategies as st

from rlcurate.core import TrainConfig
from rlcurate.objective import (ObjectiveError, nll_loss, normalize_advantages, policy_gradient, ppo_loss,
                                token_coefficients, value_loss, vapo_loss)

from helpers import finite_difference, plain_traj, relative_error, toy_gradient_case
from oracles import nll_loops, ppo_loss_loops


def ratios_traj(ratios, adv, correct=True):
    lo = np.zeros(len(ratios))
    return plain_traj(np.log(ratios), lo, adv, correct)


def test_worked_ppo_example():
    batch = [ratios_traj([1.0, 1.5], [2.0, 2.0])]
    assert abs(ppo_loss(batch, 0.2, 0.28) - (-2.28)) < 1e-12


def test_negative_advantage_clips_low():
    assert abs(ppo_loss([ratios_traj([0.5], [-1.0])], 0.2, 0.28) - 0.8) < 1e-12


def test_unit_ratio_gives_negative_mean_advantage():
    adv = [0.3, -1.2, 2.5, 0.0]
    batch = [plain_traj([-0.1, -0.2], [-0.1, -0.2], adv[:2]), plain_traj([-1, -2], [-1, -2], adv[2:])]
    assert ppo_loss(batch) == -np.mean(adv)
    assert vapo_loss(batch, TrainConfig()).clip_fraction == 0.0


def test_nll_examples():
    assert nll_loss([plain_traj([-0.5, -1.5], [0, 0], [0, 0])]) == 1.0
    assert nll_loss([plain_traj([-0.5, -1.5], [0, 0], [0, 0], correct=False)]) == 0.0
    # token-weighted over 4 tokens, not a mean of per-trajectory means
    batch = [plain_traj([-1.0], [0], [0]), plain_traj([-2.0, -2.0, -2.0], [0] * 3, [0] * 3)]
    assert nll_loss(batch) == 7.0 / 4.0
    assert nll_loss(batch) != (1.0 + 2.0) / 2


def test_vapo_composition():
    # ratios [1.0, 1.5] with log-probs whose negated mean is exactly 1.0
    lp_old = np.array([-0.5, -1.5]) - np.log([1.0, 1.5])
    t = plain_traj([-0.5, -1.5], lp_old, [2.0, 2.0])
    rep = vapo_loss([t], TrainConfig(mu=0.1))
    assert abs(rep.l_ppo - (-2.28)) < 1e-12
    assert abs(rep.l_nll - 1.0) < 1e-12
    assert abs(rep.l_vapo - (-2.18)) < 1e-12
    assert rep.clip_fraction == 0.5 and rep.n_tokens == 2 and rep.n_correct_tokens == 2


def test_mu_zero_and_empty_correct_set():
    t = plain_traj([-0.5, -1.5], [-0.4, -1.0], [1.0, -1.0])
    assert vapo_loss([t], TrainConfig(mu=0.0)).l_vapo == vapo_loss([t], TrainConfig(mu=0.0)).l_ppo
    wrong = t.with_(is_correct=False)
    rep = vapo_loss([wrong], TrainConfig(mu=5.0))
    assert rep.l_vapo == rep.l_ppo and rep.l_nll == 0.0


@given(st.lists(st.tuples(st.lists(st.floats(0.3, 2.0), min_size=1, max_size=6),
                          st.floats(-3, 3), st.booleans()), min_size=1, max_size=5))
def test_losses_match_loop_oracles(rows):
    batch, ratios, advs, logps, correct = [], [], [], [], []
    for rs, a, ok in rows:
        lp_new = np.log(rs) - 1.0
        batch.append(plain_traj(lp_new, lp_new - np.log(rs), [a] * len(rs), ok))
        ratios.append(np.exp(lp_new - (lp_new - np.log(rs))).tolist())
        advs.append([a] * len(rs))
        logps.append(lp_new.tolist())
        correct.append(ok)
    assert abs(ppo_loss(batch) - ppo_loss_loops(ratios, advs, 0.2, 0.28)) < 1e-12
    assert abs(nll_loss(batch) - nll_loops(logps, correct)) < 1e-12


@given(st.lists(st.tuples(st.lists(st.floats(-2, 0), min_size=1, max_size=5), st.floats(-2, 2), st.booleans()),
                min_size=1, max_size=4))
def test_duplicating_batch_leaves_losses_unchanged(rows):
    batch = [plain_traj(lp, np.array(lp) + 0.1, [a] * len(lp), ok) for lp, a, ok in rows]
    one, two = vapo_loss(batch, TrainConfig()), vapo_loss(batch + batch, TrainConfig())
    assert abs(one.l_vapo - two.l_vapo) < 1e-12
    assert abs(one.clip_fraction - two.clip_fraction) < 1e-12


def test_non_finite_ratio_names_trajectory_and_position():
    good = plain_traj([-1.0], [-1.0], [1.0])
    bad = plain_traj([0.0, 800.0], [0.0, -10.0], [1.0, 1.0], qid="q7")
    with pytest.raises(ObjectiveError, match=r"trajectory 1 \('q7'\) at position 1"):
        ppo_loss([good, bad])


def test_missing_advantages():
    t = plain_traj([-1.0], [-1.0], [1.0]).with_(advantages=None)
    with pytest.raises(ObjectiveError):
        ppo_loss([t])


def test_clipped_positive_token_has_zero_coefficient():
    t = ratios_traj([1.5, 1.0], [1.0, 1.0], correct=False)
    coef = token_coefficients([t], TrainConfig(mu=0.0))
    assert coef[0] == 0.0 and coef[1] != 0.0


def test_zero_advantage_zero_mu_zero_gradient():
    policy, params, batch, cfg = toy_gradient_case(3, mu=0.0)
    batch = [t.with_(advantages=np.zeros(t.length)) for t in batch]
    assert not policy_gradient(batch, policy, params, cfg).any()


@pytest.mark.parametrize("seed", range(6))
@pytest.mark.parametrize("mu", [0.0, 0.1, 1.0])
def test_gradient_matches_finite_differences(seed, mu):
    policy, params, batch, cfg = toy_gradient_case(seed, mu)
    g = policy_gradient(batch, policy, params, cfg)
    assert relative_error(g, finite_difference(policy, params, batch, cfg)) < 1e-4


def test_gradient_shape_mismatch():
    policy, params, batch, cfg = toy_gradient_case(0, 0.1)

    class Wrong:
        def logp_grad(self, params, batch, coef):
            return np.zeros(3)

    with pytest.raises(ObjectiveError, match="shape"):
        policy_gradient(batch, Wrong(), params, cfg)


def test_normalize_advantages_whitens():
    batch = [plain_traj([0, 0], [0, 0], [1.0, 3.0]), plain_traj([0], [0], [5.0])]
    adv = np.concatenate([t.advantages for t in normalize_advantages(batch)])
    assert abs(adv.mean()) < 1e-12 and abs(adv.std() - 1) < 1e-6


def test_value_loss_examples(rng):
    assert value_loss([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert value_loss([0.0, 0.0], [1.0, 1.0]) == 1.0
    p, t = rng.normal(size=50), rng.normal(size=50)
    assert abs(value_loss(p, t) - sum((a - b) ** 2 for a, b in zip(p, t)) / 50) < 1e-12
    with pytest.raises(ValueError):
        value_loss([1.0], [1.0, 2.0])
