import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ramp.baselines import (
    TabularJoint,
    bayes_ratio_check,
    conditional_entropy_gap,
    kl_optimal_policy,
    marginalize_policy,
)
from ramp.numerics import ContractError, Rng


# -- KL-regularized closed form -----------------------------------------------

def test_kl_policy_hand_softmax():
    pi = kl_optimal_policy([0.5, 0.5], [1.0, 0.0], beta=1.0)
    e = math.e
    assert pi[0] == pytest.approx(e / (e + 1), rel=1e-12)
    assert pi[1] == pytest.approx(1 / (e + 1), rel=1e-12)


def test_kl_policy_high_beta_recovers_reference():
    ref = np.array([0.2, 0.3, 0.5])
    pi = kl_optimal_policy(ref, [5.0, -2.0, 1.0], beta=1e9)
    assert np.max(np.abs(pi - ref)) < 1e-8


def test_kl_policy_low_beta_concentrates_on_argmax():
    pi = kl_optimal_policy([0.1, 0.6, 0.3], [0.0, 0.0, 1.0], beta=0.01)
    assert pi[2] > 0.999


def test_kl_policy_contracts():
    with pytest.raises(ContractError):
        kl_optimal_policy([0.5, 0.5], [0.0, 1.0], beta=0.0)
    with pytest.raises(ContractError):
        kl_optimal_policy([1.0, 0.0], [0.0, 1.0], beta=1.0)


def _grid_search_optimum(pi_ref, advantages, beta, resolution=1e-3):
    """Brute-force maximizer of E_pi[A] - beta * KL(pi || pi_ref) over a
    dense grid on the 3-simplex. Independent route: no closed form."""
    steps = int(round(1.0 / resolution))
    i = np.arange(1, steps)
    p1, p2 = np.meshgrid(i, i, indexing="ij")
    p1 = p1.ravel() * resolution
    p2 = p2.ravel() * resolution
    p3 = 1.0 - p1 - p2
    keep = p3 > resolution / 2
    pts = np.stack([p1[keep], p2[keep], p3[keep]], axis=1)
    obj = pts @ np.asarray(advantages) - beta * np.sum(
        pts * np.log(pts / np.asarray(pi_ref)), axis=1)
    return pts[np.argmax(obj)]


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_kl_policy_matches_simplex_grid_search(seed):
    rng = Rng(seed)
    raw = rng.uniform(0.1, 1.0, (3,))
    pi_ref = raw / raw.sum()
    advantages = rng.uniform(-1.0, 1.0, (3,))
    beta = float(rng.uniform(0.5, 2.0, ()))
    closed = kl_optimal_policy(pi_ref, advantages, beta)
    grid = _grid_search_optimum(pi_ref, advantages, beta)
    tv = 0.5 * np.sum(np.abs(closed - grid))
    assert tv <= 2e-3


# -- Bayes ratio identity ------------------------------------------------------

@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 31 - 1), st.integers(2, 8))
def test_bayes_ratio_identity_is_exact(seed, n_actions):
    rng = Rng(seed)
    raw = rng.uniform(0.05, 1.0, (n_actions,))
    pi_ref = raw / raw.sum()
    advantages = rng.uniform(-2.0, 2.0, (n_actions,))
    beta = float(rng.uniform(0.5, 3.0, ()))
    assert bayes_ratio_check(pi_ref, advantages, beta) <= 1e-10


def test_bayes_ratio_hand_case():
    # two actions, A = (log 2, 0), beta = 1: ratio target is (2, 1)
    assert bayes_ratio_check([0.5, 0.5], [math.log(2), 0.0], 1.0) <= 1e-12


# -- Marginalization -----------------------------------------------------------

def test_marginalize_two_by_two_hand_enumeration():
    # one observation, two latents, two actions
    p_z = np.array([[[0.25, 0.75], [0.4, 0.6]]])          # (O=1, I=2, Z=2)
    p_a = np.array([[[[0.9, 0.1], [0.9, 0.1]],            # (O=1, Z=2, I=2, A=2)
                     [[0.2, 0.8], [0.5, 0.5]]]])
    tj = TabularJoint(p_z=p_z, p_a=p_a)
    tj.validate()
    marg = marginalize_policy(tj)
    # I=0: 0.25*0.9 + 0.75*0.2, I=1: 0.4*0.9 + 0.6*0.5
    assert marg[0, 0, 0] == pytest.approx(0.25 * 0.9 + 0.75 * 0.2, rel=1e-12)
    assert marg[0, 1, 0] == pytest.approx(0.4 * 0.9 + 0.6 * 0.5, rel=1e-12)
    assert np.allclose(marg.sum(axis=-1), 1.0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_marginal_is_a_distribution(seed):
    tj = TabularJoint.random(3, 4, 5, Rng(seed))
    marg = marginalize_policy(tj)
    assert np.all(marg >= 0)
    assert np.max(np.abs(marg.sum(axis=-1) - 1.0)) < 1e-12


# -- Entropy gap ---------------------------------------------------------------

def _entropy_oracle(tj):
    """Full-joint-table entropies by explicit loops; independent of the
    einsum implementation."""
    n_o, n_i, n_z = tj.p_z.shape
    n_a = tj.p_a.shape[-1]
    h_cond = 0.0
    h_marg = 0.0
    for o in range(n_o):
        for i in range(n_i):
            marg = [sum(tj.p_z[o, i, z] * tj.p_a[o, z, i, a]
                        for z in range(n_z)) for a in range(n_a)]
            w = tj.p_o[o] * tj.p_i[o, i]
            for a in range(n_a):
                if marg[a] > 0:
                    h_marg -= w * marg[a] * math.log(marg[a])
            for z in range(n_z):
                for a in range(n_a):
                    p = tj.p_a[o, z, i, a]
                    if p > 0:
                        h_cond -= w * tj.p_z[o, i, z] * p * math.log(p)
    return h_cond, h_marg


def test_entropy_matches_loop_oracle():
    tj = TabularJoint.random(2, 3, 4, Rng(7))
    h_cond, h_marg, gap = conditional_entropy_gap(tj)
    oc, om = _entropy_oracle(tj)
    assert h_cond == pytest.approx(oc, rel=1e-12)
    assert h_marg == pytest.approx(om, rel=1e-12)
    assert gap == pytest.approx(om - oc, rel=1e-12)


def test_entropy_gap_zero_when_actions_ignore_latent():
    rng = Rng(3)
    tj = TabularJoint.random(2, 3, 4, rng)
    # make p(a|o,z,I) constant in z: marginal equals conditional
    tj.p_a[:] = tj.p_a[:, :1, :, :]
    tj.validate()
    h_cond, h_marg, gap = conditional_entropy_gap(tj)
    assert gap == pytest.approx(0.0, abs=1e-12)


def test_entropy_gap_maximal_when_latent_determines_action():
    # uniform latent, deterministic action = latent: gap is log(n_z)
    n_z = 4
    p_z = np.full((1, 2, n_z), 1.0 / n_z)
    p_a = np.zeros((1, n_z, 2, n_z))
    for z in range(n_z):
        p_a[0, z, :, z] = 1.0
    tj = TabularJoint(p_z=p_z, p_a=p_a,
                      p_i=np.array([[0.5, 0.5]]), p_o=np.array([1.0]))
    tj.validate()
    h_cond, h_marg, gap = conditional_entropy_gap(tj)
    assert h_cond == pytest.approx(0.0, abs=1e-12)
    assert gap == pytest.approx(math.log(n_z), rel=1e-12)


def test_entropy_gap_requires_weights():
    tj = TabularJoint(p_z=np.full((1, 2, 2), 0.5),
                      p_a=np.full((1, 2, 2, 2), 0.5))
    with pytest.raises(ContractError):
        conditional_entropy_gap(tj)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_entropy_gap_nonnegative(seed):
    rng = Rng(seed)
    tj = TabularJoint.random(int(rng.integers(1, 4)), int(rng.integers(2, 5)),
                             int(rng.integers(2, 6)), rng)
    _, _, gap = conditional_entropy_gap(tj)
    assert gap >= -1e-12
