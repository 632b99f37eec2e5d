"""Exact tabular checks for the advantage-conditioned policy identities,
plus the RECAP / AWR baseline training steps.

Everything here is brute-force enumerable on purpose: it separates "the
math holds" from "the learned models approximate it".
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import ContractError


@dataclass
class TabularJoint:
    """Finite joint model over observations O, latents Z, actions A and the
    binary indicator I.

    p_z[o, i, z] = p(z | o, I=i)
    p_a[o, z, i, a] = p(a | o, z, I=i)
    p_i[o, i] = p(I=i | o)            (optional, needed for entropies)
    p_o[o] = p(o)                      (optional, needed for entropies)
    """
    p_z: np.ndarray
    p_a: np.ndarray
    p_i: np.ndarray | None = None
    p_o: np.ndarray | None = None

    def validate(self, tol: float = 1e-12) -> None:
        for name, arr, axis in (("p_z", self.p_z, -1), ("p_a", self.p_a, -1)):
            if np.any(arr < 0):
                raise ValueError(f"{name} has negative entries")
            sums = arr.sum(axis=axis)
            if np.max(np.abs(sums - 1.0)) > tol:
                raise ValueError(f"{name} slices do not sum to 1")
        for name, arr in (("p_i", self.p_i), ("p_o", self.p_o)):
            if arr is not None:
                if np.any(arr < 0) or np.max(np.abs(arr.sum(axis=-1) - 1.0)) > tol:
                    raise ValueError(f"{name} is not a distribution")

    @staticmethod
    def random(n_o: int, n_z: int, n_a: int, rng) -> "TabularJoint":
        def dirichlet(shape):
            g = -np.log(rng.uniform(1e-12, 1.0, shape))
            return g / g.sum(axis=-1, keepdims=True)
        tj = TabularJoint(
            p_z=dirichlet((n_o, 2, n_z)),
            p_a=dirichlet((n_o, n_z, 2, n_a)),
            p_i=dirichlet((n_o, 2)),
            p_o=dirichlet((n_o,)),
        )
        tj.validate()
        return tj


def kl_optimal_policy(pi_ref, advantages, beta: float) -> np.ndarray:
    """Closed-form solution of KL-regularized improvement:
    pi(a) proportional to pi_ref(a) * exp(A(a) / beta)."""
    if beta <= 0:
        raise ContractError(f"beta must be positive, got {beta}")
    pi_ref = np.asarray(pi_ref, dtype=np.float64)
    advantages = np.asarray(advantages, dtype=np.float64)
    if np.any(pi_ref <= 0):
        raise ContractError("pi_ref must be strictly positive")
    # subtract the max for numerical stability; cancels in normalization
    w = np.exp((advantages - advantages.max()) / beta)
    out = pi_ref * w
    return out / out.sum()


def bayes_ratio_check(pi_ref, advantages, beta: float) -> float:
    """Max deviation of the exact Bayes ratio pi_ref(a|I=1)/pi_ref(a) from
    exp(A(a)/beta), up to the best proportionality constant."""
    pi_ref = np.asarray(pi_ref, dtype=np.float64)
    advantages = np.asarray(advantages, dtype=np.float64)
    target = np.exp(advantages / beta)
    p_i1_given_a = target / target.max()          # scaled into [0, 1]
    p_i1 = float(pi_ref @ p_i1_given_a)
    if p_i1 <= 0:
        raise ContractError("degenerate improvement probability p(I=1)=0")
    pi_given_i1 = pi_ref * p_i1_given_a / p_i1
    ratio = pi_given_i1 / pi_ref
    # least-squares optimal constant for ratio ~= c * target
    c = float(ratio @ target) / float(target @ target)
    return float(np.max(np.abs(ratio / c - target)))


def marginalize_policy(tj: TabularJoint) -> np.ndarray:
    """p(a|o,I) = sum_z p(a|o,z,I) p(z|o,I); the indicator-only policy is the
    latent-marginal of the latent-conditioned one."""
    # p_a: (O, Z, I, A); p_z: (O, I, Z)
    return np.einsum("ozia,oiz->oia", tj.p_a, tj.p_z)


def conditional_entropy_gap(tj: TabularJoint) -> tuple[float, float, float]:
    """(H(a|o,z,I), H(a|o,I), gap); exact Shannon entropies in nats.

    Conditioning on the latent can only reduce action entropy, so the gap is
    non-negative on every valid instance.
    """
    if tj.p_i is None or tj.p_o is None:
        raise ContractError("entropy computation needs p_i and p_o weights")

    def xlogx(p):
        out = np.zeros_like(p)
        mask = p > 0
        out[mask] = p[mask] * np.log(p[mask])
        return out

    # joint weights p(o, I, z) = p(o) p(I|o) p(z|o,I)
    w_oiz = np.einsum("o,oi,oiz->oiz", tj.p_o, tj.p_i, tj.p_z)
    h_cond_z = -float(np.einsum("oiz,ozia->", w_oiz, xlogx(tj.p_a)))
    marg = marginalize_policy(tj)                 # (O, I, A)
    w_oi = np.einsum("o,oi->oi", tj.p_o, tj.p_i)
    h_marg = -float(np.einsum("oi,oia->", w_oi, xlogx(marg)))
    gap = h_marg - h_cond_z
    return h_cond_z, h_marg, gap
