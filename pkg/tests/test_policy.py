import numpy as np
import pytest
from dataclasses import replace

from ramp.numerics import Adam, ContractError, Rng, grad_check
from ramp.policy import (
    ChunkDataset,
    PolicyConfig,
    awr_weights,
    future_latents_from_truth,
    init_policy,
    policy_loss,
    policy_velocity,
    project_future_latents,
    recap_train_step,
    sample_actions,
    train_policy,
    train_step,
)
from ramp.worldmodel import WorldModelConfig, init_params
from ramp.envs import make_task

from test_envs import random_episode


PCFG = PolicyConfig(action_dim=2, chunk_len=3, hz=2, wz=2, c_obs=4, embed=8,
                    hidden=8, depth=1, n_offsets=2, latent_channels=5,
                    k_euler=4, batch_size=4, steps=5)


def synth_inputs(seed=0, b=3, cfg=PCFG, d_p=2):
    rng = Rng(seed)
    frames = rng.uniform(0, 1, (b, 1, 4, 4))
    proprio = rng.uniform(0, 1, (b, d_p))
    latents = rng.normal((b, cfg.n_future_tokens, cfg.latent_channels))
    actions = rng.normal((b, cfg.chunk_len, cfg.action_dim))
    tau = rng.uniform(0, 1, (b,))
    eps = rng.normal((b, cfg.out_dim))
    ind = rng.integers(0, 2, (b,)).astype(float)
    return frames, proprio, latents, actions, tau, eps, ind


def synth_params(seed=0, cfg=PCFG, d_p=2):
    return init_policy(cfg, (1, 4, 4), d_p, Rng(seed))


# -- Latent projection and masking ---------------------------------------------

def test_masked_latents_do_not_reach_the_output():
    params = synth_params()
    f, p, lat_a, actions, tau, eps, ind = synth_inputs(seed=1)
    lat_b = Rng(99).normal(lat_a.shape)
    mask = np.ones(3)
    out_a = policy_velocity(params, PCFG, f, p, lat_a, mask, ind,
                            eps, tau)
    out_b = policy_velocity(params, PCFG, f, p, lat_b, mask, ind,
                            eps, tau)
    assert np.array_equal(out_a.data, out_b.data)


def test_unmasked_latents_do_reach_the_output():
    params = synth_params()
    f, p, lat_a, actions, tau, eps, ind = synth_inputs(seed=1)
    lat_b = Rng(99).normal(lat_a.shape)
    mask = np.zeros(3)
    out_a = policy_velocity(params, PCFG, f, p, lat_a, mask, ind, eps, tau)
    out_b = policy_velocity(params, PCFG, f, p, lat_b, mask, ind, eps, tau)
    assert not np.array_equal(out_a.data, out_b.data)


def test_project_future_latents_contracts():
    params = synth_params()
    lat = np.zeros((2, PCFG.n_future_tokens, PCFG.latent_channels))
    with pytest.raises(ContractError):
        project_future_latents(params, PCFG, lat, np.array([0.5, 0.0]))
    with pytest.raises(ContractError):
        project_future_latents(params, PCFG, lat[:, :3], np.zeros(2))


def test_mask_prob_one_loss_is_latent_invariant():
    cfg = replace(PCFG, mask_prob=1.0)
    params = synth_params()
    f, p, lat_a, actions, tau, eps, ind = synth_inputs(seed=2)
    lat_b = Rng(123).normal(lat_a.shape)
    mask = np.ones(3)
    la = policy_loss(params, cfg, f, p, lat_a, mask, ind, actions, tau, eps)
    lb = policy_loss(params, cfg, f, p, lat_b, mask, ind, actions, tau, eps)
    assert la.item() == lb.item()


# -- Dual-term loss ------------------------------------------------------------

def test_indicator_zeroed_embedding_doubles_loss():
    # killing the indicator input columns makes both terms identical, so the
    # dual loss with alpha=1 is exactly twice the single term
    params = synth_params()
    params["glob.w"].data[-2:, :] = 0.0
    f, p, lat, actions, tau, eps, ind = synth_inputs(seed=3)
    mask = np.zeros(3)
    dual = policy_loss(params, replace(PCFG, alpha=1.0), f, p, lat, mask,
                       ind, actions, tau, eps)
    single = policy_loss(params, replace(PCFG, alpha=0.0), f, p, lat, mask,
                         ind, actions, tau, eps)
    assert dual.item() == pytest.approx(2.0 * single.item(), rel=1e-12)


def test_indicator_value_changes_conditioned_term_only():
    params = synth_params()
    f, p, lat, actions, tau, eps, _ = synth_inputs(seed=4)
    mask = np.zeros(3)
    l0 = policy_loss(params, replace(PCFG, alpha=0.0), f, p, lat, mask,
                     np.zeros(3), actions, tau, eps)
    l1 = policy_loss(params, replace(PCFG, alpha=0.0), f, p, lat, mask,
                     np.ones(3), actions, tau, eps)
    assert l0.item() == l1.item()          # alpha=0: indicator never read
    d0 = policy_loss(params, PCFG, f, p, lat, mask, np.zeros(3), actions, tau, eps)
    d1 = policy_loss(params, PCFG, f, p, lat, mask, np.ones(3), actions, tau, eps)
    assert d0.item() != d1.item()


def test_policy_loss_gradcheck():
    params = synth_params(seed=5)
    f, p, lat, actions, tau, eps, ind = synth_inputs(seed=6, b=2)
    mask = np.array([0.0, 1.0])

    def fn():
        return policy_loss(params, PCFG, f, p, lat, mask, ind, actions, tau, eps)

    subset = [params[k] for k in ("glob.w", "fut.w.b", "out.w.b", "blk0.ln2.g")]
    assert grad_check(fn, subset, h=1e-5) <= 1e-4


def test_weighted_loss_scales_linearly():
    params = synth_params()
    f, p, lat, actions, tau, eps, ind = synth_inputs(seed=7)
    mask = np.zeros(3)
    base = policy_loss(params, replace(PCFG, alpha=0.0), f, p, lat, mask, ind,
                       actions, tau, eps)
    scaled = policy_loss(params, replace(PCFG, alpha=0.0), f, p, lat, mask,
                         ind, actions, tau, eps, sample_weights=np.full(3, 2.5))
    assert scaled.item() == pytest.approx(2.5 * base.item(), rel=1e-12)


def test_awr_weights_hand_values():
    w = awr_weights([0.0, 1.0, 100.0], beta=1.0, w_max=20.0)
    assert w[0] == 1.0
    assert w[1] == pytest.approx(np.e)
    assert w[2] == 20.0
    with pytest.raises(ContractError):
        awr_weights([0.0], beta=0.0)


# -- Sampling ------------------------------------------------------------------

def test_sample_actions_zero_field_returns_noise():
    params = synth_params()
    params["out.w"].data[:] = 0.0
    params["out.w.b"].data[:] = 0.0
    f, p, lat, *_ = synth_inputs(seed=8)
    eps = Rng(11).normal((3, PCFG.out_dim))
    out = sample_actions(params, PCFG, f, p, lat, eps, mode="standard")
    assert np.array_equal(out, eps.reshape(3, PCFG.chunk_len, PCFG.action_dim))


def test_sample_actions_efficient_mode_ignores_latents():
    params = synth_params()
    f, p, lat, *_ = synth_inputs(seed=9)
    eps = Rng(12).normal((3, PCFG.out_dim))
    a1 = sample_actions(params, PCFG, f, p, lat, eps, mode="efficient")
    a2 = sample_actions(params, PCFG, f, p, None, eps, mode="efficient")
    a3 = sample_actions(params, PCFG, f, p, Rng(77).normal(lat.shape), eps,
                        mode="efficient")
    assert np.array_equal(a1, a2) and np.array_equal(a1, a3)


def test_sample_actions_contracts():
    params = synth_params()
    f, p, lat, *_ = synth_inputs(seed=10)
    eps = np.zeros((3, PCFG.out_dim))
    with pytest.raises(ContractError):
        sample_actions(params, PCFG, f, p, None, eps, mode="standard")
    with pytest.raises(ContractError):
        sample_actions(params, PCFG, f, p, lat, eps, mode="greedy")


# -- Dataset -------------------------------------------------------------------

def env_episodes(n=3):
    task = make_task("place-one", width=4, height=4)
    return task, [random_episode(task, s) for s in range(n)]


def test_chunk_dataset_counts_and_padding():
    task, eps = env_episodes(1)
    ep = eps[0]
    data = ChunkDataset(eps, chunk_len=4)
    n_chunks = -(-ep.length // 4)
    assert len(data) == n_chunks
    frames, proprio, actions, adv, ind, steps = data.sample(8, Rng(0))
    assert actions.shape == (8, 4, 6)
    tail = ep.length % 4
    if tail:
        i, t = None, (n_chunks - 1) * 4
        for k, (ei, start) in enumerate(steps):
            if start == t:
                assert np.all(actions[k][tail:] == 0.0)


def test_chunk_dataset_contracts():
    with pytest.raises(ContractError):
        ChunkDataset([], 4)


def test_train_policy_rejects_mismatched_action_dim():
    task, eps = env_episodes(1)
    cfg = replace(PCFG, action_dim=3)
    with pytest.raises(ContractError):
        train_policy(eps, cfg, None, Rng(0), method="bc")


def test_train_policy_rejects_unknown_method():
    task, eps = env_episodes(1)
    with pytest.raises(ContractError):
        train_policy(eps, PCFG, None, Rng(0), method="dagger")


# -- Training steps ------------------------------------------------------------

def env_policy_cfg(steps=3):
    return PolicyConfig(action_dim=6, chunk_len=4, hz=2, wz=2, c_obs=4,
                        embed=8, hidden=8, depth=1, n_offsets=2,
                        latent_channels=2 + 1 + 3, k_euler=2, batch_size=4,
                        steps=steps)


def env_wm_cfg():
    return WorldModelConfig(hz=2, wz=2, cz=2, embed=8, hidden=8, depth=1,
                            offsets=(2, 4))


def test_recap_step_is_latent_suppressed_primary_step():
    task, eps = env_episodes(2)
    cfg = env_policy_cfg()
    rng = Rng(0)
    data = ChunkDataset(eps, cfg.chunk_len)
    frames, proprio, actions, adv, ind, _ = data.sample(4, rng.split("b"))
    lat = rng.split("lat").normal((4, cfg.n_future_tokens, cfg.latent_channels))
    tau = rng.split("tau").uniform(0, 1, (4,))
    noise = rng.split("eps").normal((4, cfg.out_dim))

    p1 = init_policy(cfg, data.frame_shape, data.d_p, Rng(5))
    p2 = init_policy(cfg, data.frame_shape, data.d_p, Rng(5))
    l1 = train_step(p1, cfg, Adam(p1, lr=cfg.lr), frames, proprio, lat,
                    np.ones(4), ind, actions, tau, noise)
    l2 = recap_train_step(p2, cfg, Adam(p2, lr=cfg.lr), frames, proprio, lat,
                          ind, actions, tau, noise)
    assert l1 == l2
    for k in p1:
        assert np.array_equal(p1[k].data, p2[k].data), k


def test_train_policy_all_methods_run():
    task, eps = env_episodes(2)
    cfg = env_policy_cfg()
    wm_cfg = env_wm_cfg()
    wm_params = init_params(wm_cfg, eps[0].frames.shape[1:],
                            eps[0].proprio.shape[1], Rng(1))
    for method in ("ramp", "recap", "awr", "bc"):
        wm = (wm_params, wm_cfg) if method == "ramp" else None
        params, metrics = train_policy(eps, cfg, wm, Rng(2), method=method)
        assert np.isfinite(metrics[-1]["loss"])
        if method != "ramp":
            assert metrics[-1]["mask_rate"] == 1.0


def test_mask_rate_counter_tracks_bernoulli_draws():
    task, eps = env_episodes(2)
    cfg = env_policy_cfg(steps=50)
    wm_cfg = env_wm_cfg()
    wm_params = init_params(wm_cfg, eps[0].frames.shape[1:],
                            eps[0].proprio.shape[1], Rng(1))
    params, metrics = train_policy(eps, cfg, (wm_params, wm_cfg), Rng(3),
                                   method="ramp")
    rate = metrics[-1]["mask_rate"]
    assert abs(rate - cfg.mask_prob) < 0.08


def test_train_policy_deterministic():
    task, eps = env_episodes(2)
    cfg = env_policy_cfg()
    p1, _ = train_policy(eps, cfg, None, Rng(9), method="bc")
    p2, _ = train_policy(eps, cfg, None, Rng(9), method="bc")
    for k in p1:
        assert np.array_equal(p1[k].data, p2[k].data), k


def test_future_latents_from_truth_shapes():
    task, eps = env_episodes(1)
    cfg = env_policy_cfg()
    wm_cfg = env_wm_cfg()
    wm_params = init_params(wm_cfg, eps[0].frames.shape[1:],
                            eps[0].proprio.shape[1], Rng(4))
    data = ChunkDataset(eps, cfg.chunk_len)
    frames, proprio, actions, adv, ind, steps = data.sample(3, Rng(0))
    ff, fv, fp = data.future_truth(steps, wm_cfg.offsets)
    lat = future_latents_from_truth(wm_params, wm_cfg, ff, fv, fp)
    assert lat.shape == (3, cfg.n_future_tokens, cfg.latent_channels)
    assert np.all(np.abs(fv) <= 1.0)
