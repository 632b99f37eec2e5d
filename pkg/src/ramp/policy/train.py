"""Policy training on annotated episodes, plus the baseline variants.

Methods:
  ramp   - dual-term loss, indicator conditioning, stochastic latent masking
  recap  - same loss with the future latents always suppressed (the latent
           marginal of the ramp policy)
  awr    - single-term loss weighted by clipped exp(A / beta)
  bc     - plain single-term behavioral cloning
"""
from __future__ import annotations

import time
from dataclasses import replace

import numpy as np

from ..advantage import annotate_episode
from ..envs import normalize_value
from ..numerics import Adam, ContractError
from ..worldmodel.latent import pack_state
from ..worldmodel.model import encode_array, predict
from .model import PolicyConfig, init_policy, policy_loss

METHODS = ("ramp", "recap", "awr", "bc")


class ChunkDataset:
    """Episodes cut into fixed-length action chunks with n-step advantage
    annotations computed from empirical returns."""

    def __init__(self, episodes, chunk_len: int, gamma: float = 0.99,
                 eps_thr: float = 0.0):
        if not episodes:
            raise ContractError("policy training needs at least one episode")
        self.episodes = episodes
        self.chunk_len = chunk_len
        self.index = []              # (episode_idx, start_step)
        self.annotations = []
        for i, ep in enumerate(episodes):
            values = ep.values()
            anns = annotate_episode(ep.rewards, values, chunk_len,
                                    gamma=gamma, eps_thr=eps_thr)
            for j, ann in enumerate(anns):
                self.index.append((i, j * chunk_len))
                self.annotations.append(ann)
        self.frame_shape = episodes[0].frames.shape[1:]
        self.d_p = episodes[0].proprio.shape[1]
        self.action_dim = episodes[0].actions.shape[1]

    def __len__(self):
        return len(self.index)

    def sample(self, batch_size: int, rng):
        picks = rng.integers(0, len(self.index), (batch_size,))
        frames, proprio, actions, adv, ind = [], [], [], [], []
        ep_steps = []
        for k in picks:
            i, t = self.index[int(k)]
            ep = self.episodes[i]
            chunk = ep.actions[t:t + self.chunk_len]
            if chunk.shape[0] < self.chunk_len:
                pad = np.zeros((self.chunk_len - chunk.shape[0], self.action_dim))
                chunk = np.concatenate([chunk, pad])
            frames.append(ep.frames[t])
            proprio.append(ep.proprio[t])
            actions.append(chunk)
            adv.append(self.annotations[int(k)].advantage)
            ind.append(self.annotations[int(k)].indicator)
            ep_steps.append((i, t))
        return (np.array(frames), np.array(proprio), np.array(actions),
                np.array(adv), np.array(ind, dtype=np.float64), ep_steps)

    def future_truth(self, ep_steps, offsets):
        """Ground-truth future frames/values/proprio per offset, clamped to
        the episode end (teacher-forced conditioning)."""
        frames, values, proprio = [], [], []
        for i, t in ep_steps:
            ep = self.episodes[i]
            max_steps = int(round(ep.c_fail / 2.0))
            vals = ep.values()
            fr, vv, pp = [], [], []
            for off in offsets:
                t2 = min(t + off, ep.length - 1)
                fr.append(ep.frames[t2])
                vv.append(normalize_value(vals[t2], max_steps, ep.c_fail))
                pp.append(ep.proprio[t2])
            frames.append(fr)
            values.append(vv)
            proprio.append(pp)
        return np.array(frames), np.array(values), np.array(proprio)


def future_latents_from_model(wm_params, wm_cfg, frames, proprio, rng) -> np.ndarray:
    """World-model single-step samples for every horizon offset, stacked in
    offset order: (B, n_offsets * L, cs)."""
    b = frames.shape[0]
    cs = wm_cfg.target_channels(proprio.shape[1])
    parts = []
    for oi in range(len(wm_cfg.offsets)):
        eps = rng.normal((b, wm_cfg.n_tokens, cs))
        parts.append(predict(wm_params, wm_cfg, frames, proprio,
                             np.full(b, oi), eps, n_steps=1))
    return np.concatenate(parts, axis=1)


def future_latents_from_truth(wm_params, wm_cfg, f_frames, f_values,
                              f_proprio) -> np.ndarray:
    """Packed encodings of the real future observations (teacher forcing)."""
    b, n_off = f_frames.shape[:2]
    parts = []
    for oi in range(n_off):
        z = encode_array(wm_params, wm_cfg, f_frames[:, oi])
        parts.append(pack_state(z, f_values[:, oi], f_proprio[:, oi]))
    return np.concatenate(parts, axis=1)


def train_step(params, cfg: PolicyConfig, opt: Adam, frames, proprio, latents,
               mask, indicator, actions, tau, eps, sample_weights=None) -> float:
    opt.zero_grad()
    loss = policy_loss(params, cfg, frames, proprio, latents, mask, indicator,
                       actions, tau, eps, sample_weights)
    loss.backward()
    opt.step()
    return loss.item()


def recap_train_step(params, cfg: PolicyConfig, opt: Adam, frames, proprio,
                     latents, indicator, actions, tau, eps) -> float:
    """One update of the latent-marginal baseline: identical to the primary
    step except the future latents are unconditionally suppressed."""
    b = frames.shape[0]
    return train_step(params, cfg, opt, frames, proprio, latents,
                      np.ones(b), indicator, actions, tau, eps)


def awr_weights(advantages, beta: float = 1.0, w_max: float = 20.0) -> np.ndarray:
    """Clipped exponential advantage weights."""
    if beta <= 0:
        raise ContractError(f"beta must be positive, got {beta}")
    return np.minimum(np.exp(np.asarray(advantages, dtype=np.float64) / beta),
                      w_max)


def train_policy(episodes, cfg: PolicyConfig, wm, rng, method: str = "ramp",
                 params: dict | None = None, gamma: float = 0.99,
                 awr_beta: float = 1.0, awr_w_max: float = 20.0,
                 log_every: int = 25):
    """Train a policy; wm is a (params, config) pair or None when the method
    never reads future latents. Returns (params, metric rows)."""
    if method not in METHODS:
        raise ContractError(f"unknown method {method!r}; expected one of {METHODS}")
    data = ChunkDataset(episodes, cfg.chunk_len, gamma=gamma)
    if data.action_dim != cfg.action_dim:
        raise ContractError(f"episodes carry {data.action_dim}-dim actions, "
                            f"config says {cfg.action_dim}")
    if method in ("awr", "bc"):
        cfg = replace(cfg, alpha=0.0)
    if params is None:
        params = init_policy(cfg, data.frame_shape, data.d_p, rng.split("init"))
    opt = Adam(params, lr=cfg.lr)
    batch_rng = rng.split("batches")
    noise_rng = rng.split("noise")
    mask_rng = rng.split("mask")
    wm_rng = rng.split("wm")
    uses_latents = method == "ramp"
    zero_lat = np.zeros((cfg.batch_size, cfg.n_future_tokens, cfg.latent_channels))
    metrics = []
    masked_total = 0
    t0 = time.perf_counter()
    for step in range(cfg.steps):
        frames, proprio, actions, adv, ind, ep_steps = data.sample(
            cfg.batch_size, batch_rng)
        if uses_latents:
            if wm is None:
                raise ContractError("method 'ramp' needs a world model")
            wm_params, wm_cfg = wm
            if cfg.conditioning == "truth":
                ff, fv, fp = data.future_truth(ep_steps, wm_cfg.offsets)
                latents = future_latents_from_truth(wm_params, wm_cfg, ff, fv, fp)
            else:
                latents = future_latents_from_model(wm_params, wm_cfg, frames,
                                                    proprio, wm_rng)
            mask = (mask_rng.uniform(0.0, 1.0, (cfg.batch_size,))
                    < cfg.mask_prob).astype(np.float64)
        else:
            latents = zero_lat[:frames.shape[0]]
            mask = np.ones(frames.shape[0])
        masked_total += int(mask.sum())
        tau = noise_rng.uniform(0.0, 1.0, (cfg.batch_size,))
        eps = noise_rng.normal((cfg.batch_size, cfg.out_dim))
        weights = awr_weights(adv, awr_beta, awr_w_max) if method == "awr" else None
        loss = train_step(params, cfg, opt, frames, proprio, latents, mask,
                          ind, actions, tau, eps, weights)
        if step % log_every == 0 or step == cfg.steps - 1:
            metrics.append({
                "step": step,
                "loss": loss,
                "mask_rate": masked_total / ((step + 1) * cfg.batch_size),
                "wall_ms": (time.perf_counter() - t0) * 1e3,
            })
    return params, metrics
