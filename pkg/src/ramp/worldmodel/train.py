"""World-model pre-training on recorded episodes."""
from __future__ import annotations

import time

import numpy as np

from ..envs import normalize_value
from ..numerics import Adam, ContractError
from .model import (
    WorldModelConfig,
    fm_loss,
    init_params,
    predict,
    value_estimates,
)


class EpisodeDataset:
    """Episodes flattened into per-step arrays with normalized value labels."""

    def __init__(self, episodes):
        if not episodes:
            raise ContractError("world-model training needs at least one episode")
        self.episodes = episodes
        self.values = []
        for ep in episodes:
            max_steps = int(round(ep.c_fail / 2.0))
            self.values.append(
                np.array([normalize_value(v, max_steps, ep.c_fail)
                          for v in ep.values()]))
        self.frame_shape = episodes[0].frames.shape[1:]
        self.d_p = episodes[0].proprio.shape[1]

    def sample(self, cfg: WorldModelConfig, batch_size: int, rng):
        """A training batch: current step, horizon offset, and the future
        step clamped to the episode end (terminal states absorb)."""
        ep_idx = rng.integers(0, len(self.episodes), (batch_size,))
        off_idx = rng.integers(0, len(cfg.offsets), (batch_size,))
        frames, proprio, f_frames, f_values, f_proprio = [], [], [], [], []
        for e, o in zip(ep_idx, off_idx):
            ep = self.episodes[int(e)]
            t = int(rng.integers(0, ep.length))
            t2 = min(t + cfg.offsets[int(o)], ep.length - 1)
            frames.append(ep.frames[t])
            proprio.append(ep.proprio[t])
            f_frames.append(ep.frames[t2])
            f_values.append(self.values[int(e)][t2])
            f_proprio.append(ep.proprio[t2])
        return (np.array(frames), np.array(proprio), np.array(f_frames),
                np.array(f_values), np.array(f_proprio), off_idx)


def value_standardization(episodes) -> tuple[float, float]:
    """Mean and scale of the normalized value labels across a corpus.

    Intended for ``WorldModelConfig.value_mean`` / ``value_scale``: the raw
    labels cluster in a sliver of [0,1], so the flow target is standardized
    and predictions are mapped back at read-out.
    """
    data = EpisodeDataset(episodes)
    flat = np.concatenate(data.values)
    scale = float(flat.std())
    if scale < 1e-9:
        scale = 1.0
    return float(flat.mean()), scale


def train_world_model(episodes, cfg: WorldModelConfig, rng,
                      params: dict | None = None, log_every: int = 25):
    """Returns (params, metric rows); each row is {step, loss, wall_ms}."""
    from .model import make_targets

    data = EpisodeDataset(episodes)
    if params is None:
        params = init_params(cfg, data.frame_shape, data.d_p, rng.split("init"))
    opt = Adam(params, lr=cfg.lr)
    batch_rng = rng.split("batches")
    noise_rng = rng.split("noise")
    metrics = []
    t0 = time.perf_counter()
    cs = cfg.target_channels(data.d_p)
    for step in range(cfg.steps):
        fr, pr, ffr, fv, fp, off = data.sample(cfg, cfg.batch_size, batch_rng)
        targets = make_targets(params, cfg, ffr, fv, fp)
        tau = noise_rng.uniform(0.0, 1.0, (cfg.batch_size,))
        eps = noise_rng.normal((cfg.batch_size, cfg.n_tokens, cs))
        opt.zero_grad()
        loss = fm_loss(params, cfg, fr, pr, targets, off, tau, eps)
        loss.backward()
        opt.step()
        if step % log_every == 0 or step == cfg.steps - 1:
            metrics.append({
                "step": step,
                "loss": loss.item(),
                "wall_ms": (time.perf_counter() - t0) * 1e3,
            })
    return params, metrics


def evaluate_values(params: dict, cfg: WorldModelConfig, episodes, rng,
                    n_samples: int = 512, n_euler_steps: int = 1):
    """Predicted vs. label values at random (step, offset) queries.

    Returns (pred, truth) arrays of normalized values, plus mean per-query
    inference milliseconds.
    """
    data = EpisodeDataset(episodes)
    cs = cfg.target_channels(data.d_p)
    preds, truths = [], []
    t0 = time.perf_counter()
    done = 0
    while done < n_samples:
        take = min(64, n_samples - done)
        fr, pr, _, fv, _, off = data.sample(cfg, take, rng)
        eps = rng.normal((take, cfg.n_tokens, cs))
        s_hat = predict(params, cfg, fr, pr, off, eps, n_steps=n_euler_steps)
        preds.append(value_estimates(cfg, s_hat))
        truths.append(fv)
        done += take
    ms = (time.perf_counter() - t0) * 1e3 / n_samples
    return np.concatenate(preds), np.concatenate(truths), ms
