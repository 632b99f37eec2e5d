"""Flow-matching action policy conditioned on observations, predicted future
latents, and a binary improvement indicator.

The policy generates action chunks by integrating a learned velocity field.
Conditioning inputs are tokens: patch encodings of the current frame plus one
token per future-latent grid cell. Future latents can be suppressed
(multiplied by a 0/1 mask) per sample; a suppressed sample's latent tokens
reduce to the projection bias, so the output is bitwise independent of the
latent values.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..numerics import ContractError, Tensor, concat, layer_norm
from ..worldmodel.latent import extract_patches, tile_plane


@dataclass(frozen=True)
class PolicyConfig:
    action_dim: int
    chunk_len: int = 4
    hz: int = 4
    wz: int = 4
    c_obs: int = 8
    embed: int = 64
    hidden: int = 128
    depth: int = 2
    n_offsets: int = 4
    latent_channels: int = 13        # packed latent width from the world model
    alpha: float = 1.0               # weight of the indicator-conditioned term
    mask_prob: float = 0.2           # chance of suppressing the future latents
    k_euler: int = 10
    lr: float = 1e-3
    batch_size: int = 32
    steps: int = 400
    conditioning: str = "model"      # or "truth": encode real future frames

    @property
    def n_obs_tokens(self) -> int:
        return self.hz * self.wz

    @property
    def n_future_tokens(self) -> int:
        return self.n_offsets * self.hz * self.wz

    @property
    def n_tokens(self) -> int:
        return self.n_obs_tokens + self.n_future_tokens

    @property
    def out_dim(self) -> int:
        return self.chunk_len * self.action_dim


def init_policy(cfg: PolicyConfig, frame_shape, d_p: int, rng) -> dict:
    c, h, w = frame_shape
    patch_dim = c * (h // cfg.hz) * (w // cfg.wz)

    def mat(name, rows, cols, params, scale=None):
        scale = (1.0 / np.sqrt(rows)) if scale is None else scale
        params[name] = Tensor(rng.split(name).normal((rows, cols)) * scale,
                              requires_grad=True)
        params[name + ".b"] = Tensor(np.zeros(cols), requires_grad=True)

    params: dict[str, Tensor] = {}
    mat("enc.w", patch_dim, cfg.c_obs, params)
    mat("obs.w", cfg.c_obs + d_p, cfg.embed, params)
    mat("fut.w", cfg.latent_channels + cfg.n_offsets, cfg.embed, params)
    # per-sample globals: noised action chunk, tau, indicator one-hot (2)
    mat("glob.w", cfg.out_dim + 1 + 2, cfg.embed, params)
    params["pos"] = Tensor(rng.split("pos").normal((cfg.n_tokens, cfg.embed)) * 0.02,
                           requires_grad=True)
    for d in range(cfg.depth):
        for ln in (f"blk{d}.ln1", f"blk{d}.ln2"):
            params[ln + ".g"] = Tensor(np.ones(cfg.embed), requires_grad=True)
            params[ln + ".b"] = Tensor(np.zeros(cfg.embed), requires_grad=True)
        params[f"blk{d}.tok.w"] = Tensor(
            rng.split(f"blk{d}.tok").normal((cfg.n_tokens, cfg.n_tokens))
            / np.sqrt(cfg.n_tokens), requires_grad=True)
        mat(f"blk{d}.mlp1.w", cfg.embed, cfg.hidden, params)
        mat(f"blk{d}.mlp2.w", cfg.hidden, cfg.embed, params)
    params["out.ln.g"] = Tensor(np.ones(cfg.embed), requires_grad=True)
    params["out.ln.b"] = Tensor(np.zeros(cfg.embed), requires_grad=True)
    mat("out.w", cfg.embed, cfg.out_dim, params)
    return params


def project_future_latents(params: dict, cfg: PolicyConfig,
                           latents: np.ndarray, mask: np.ndarray) -> Tensor:
    """Masked latent grids -> embedded tokens (B * n_future_tokens, embed).

    latents: (B, n_offsets * hz * wz, latent_channels), token-major with the
    offsets stacked in order. mask: (B,) in {0, 1}; 1 suppresses the latents,
    collapsing every latent token of that sample onto the projection bias.
    """
    b, lf, cs = latents.shape
    if lf != cfg.n_future_tokens or cs != cfg.latent_channels:
        raise ContractError(f"future latents {latents.shape} do not match "
                            f"({cfg.n_future_tokens}, {cfg.latent_channels})")
    mask = np.asarray(mask, dtype=np.float64)
    if mask.shape != (b,) or not np.all((mask == 0) | (mask == 1)):
        raise ContractError("mask must be a (B,) array of 0/1 bits")
    kept = latents * (1.0 - mask)[:, None, None]
    per_grid = cfg.hz * cfg.wz
    offset_flags = np.zeros((b, lf, cfg.n_offsets))
    for o in range(cfg.n_offsets):
        offset_flags[:, o * per_grid:(o + 1) * per_grid, o] = 1.0
    rows = np.concatenate([kept, offset_flags], axis=-1).reshape(b * lf, -1)
    return (Tensor(rows) @ params["fut.w"]).add_bias(params["fut.w.b"])


def _token_mean(h: Tensor, b: int, l: int, e: int) -> Tensor:
    """Per-sample mean over tokens via a constant averaging matmul."""
    avg = Tensor(np.full((1, l), 1.0 / l))
    h = h.reshape(b, l, e).permute(1, 0, 2).reshape(l, b * e)
    return (avg @ h).reshape(b, e)


def policy_velocity(params: dict, cfg: PolicyConfig, frames: np.ndarray,
                    proprio: np.ndarray, latents: np.ndarray, mask: np.ndarray,
                    indicator: np.ndarray | None, x_tau: np.ndarray,
                    tau: np.ndarray) -> Tensor:
    """Predicted action-chunk flow velocity, shape (B, chunk_len*action_dim).

    indicator=None is the unconditioned pass; otherwise a (B,) 0/1 array.
    The two cases use distinct one-hot inputs so "no indicator" is not
    conflated with "indicator = 0".
    """
    tau = np.asarray(tau, dtype=np.float64)
    if np.any(tau < 0) or np.any(tau > 1):
        raise ContractError(f"tau must lie in [0, 1], got range "
                            f"[{tau.min()}, {tau.max()}]")
    b = frames.shape[0]
    if x_tau.shape != (b, cfg.out_dim):
        raise ContractError(f"x_tau shape {x_tau.shape} != ({b}, {cfg.out_dim})")
    lo, lf, l, e = (cfg.n_obs_tokens, cfg.n_future_tokens, cfg.n_tokens,
                    cfg.embed)

    patches = extract_patches(np.asarray(frames, dtype=np.float64), cfg.hz, cfg.wz)
    obs_feat = (Tensor(patches.reshape(b * lo, -1)) @ params["enc.w"]) \
        .add_bias(params["enc.w.b"]).tanh()
    obs_rows = concat([obs_feat, Tensor(tile_plane(proprio, lo).reshape(b * lo, -1))],
                      axis=1)
    obs_tok = (obs_rows @ params["obs.w"]).add_bias(params["obs.w.b"])
    fut_tok = project_future_latents(params, cfg, latents, mask)

    if indicator is None:
        ind_hot = np.zeros((b, 2))
    else:
        indicator = np.asarray(indicator, dtype=np.float64)
        ind_hot = np.stack([1.0 - indicator, indicator], axis=1)
    glob_rows = np.concatenate([x_tau, tau[:, None], ind_hot], axis=1)
    glob = (Tensor(glob_rows) @ params["glob.w"]).add_bias(params["glob.w.b"])

    h = concat([obs_tok.reshape(b, lo, e), fut_tok.reshape(b, lf, e)], axis=1)
    h = h.reshape(b * l, e)
    h = h + glob.index_rows(np.repeat(np.arange(b), l))
    h = h + params["pos"].index_rows(np.tile(np.arange(l), b))
    for d in range(cfg.depth):
        u = layer_norm(h, params[f"blk{d}.ln1.g"], params[f"blk{d}.ln1.b"])
        u = u.reshape(b, l, e).permute(1, 0, 2).reshape(l, b * e)
        u = params[f"blk{d}.tok.w"] @ u
        u = u.reshape(l, b, e).permute(1, 0, 2).reshape(b * l, e)
        h = h + u
        u = layer_norm(h, params[f"blk{d}.ln2.g"], params[f"blk{d}.ln2.b"])
        u = (u @ params[f"blk{d}.mlp1.w"]).add_bias(params[f"blk{d}.mlp1.w.b"]).tanh()
        u = (u @ params[f"blk{d}.mlp2.w"]).add_bias(params[f"blk{d}.mlp2.w.b"])
        h = h + u
    pooled = _token_mean(h, b, l, e)
    pooled = layer_norm(pooled, params["out.ln.g"], params["out.ln.b"])
    return (pooled @ params["out.w"]).add_bias(params["out.w.b"])


def policy_loss(params: dict, cfg: PolicyConfig, frames, proprio, latents,
                mask, indicator, actions, tau, eps,
                sample_weights=None) -> Tensor:
    """Dual-term flow-matching objective.

    Both terms regress (actions - eps) at the shared interpolation point:
    the first without the indicator input, the second (weighted alpha) with
    it. Optional per-sample weights scale both terms (used by the
    advantage-weighted baseline, which sets alpha = 0).
    """
    actions = np.asarray(actions, dtype=np.float64).reshape(-1, cfg.out_dim)
    eps = np.asarray(eps, dtype=np.float64).reshape(actions.shape)
    tau = np.asarray(tau, dtype=np.float64)
    x_tau = tau[:, None] * actions + (1.0 - tau[:, None]) * eps
    want = Tensor(actions - eps)

    def term(ind):
        pred = policy_velocity(params, cfg, frames, proprio, latents, mask,
                               ind, x_tau, tau)
        sq = (pred - want).square()
        if sample_weights is not None:
            w = np.asarray(sample_weights, dtype=np.float64)
            sq = sq * Tensor(np.repeat(w[:, None], cfg.out_dim, axis=1))
        return sq.mean()

    loss = term(None)
    if cfg.alpha != 0.0:
        loss = loss + term(indicator) * cfg.alpha
    return loss


def sample_actions(params: dict, cfg: PolicyConfig, frames, proprio, latents,
                   eps, mode: str = "standard") -> np.ndarray:
    """Sample action chunks (B, chunk_len, action_dim) by Euler integration.

    mode "standard" conditions on the provided future latents; "efficient"
    suppresses them (mask = 1) so the latents are never read. Inference is
    always optimistic: the indicator is forced to 1.
    """
    if mode not in ("standard", "efficient"):
        raise ContractError(f"unknown inference mode {mode!r}")
    b = frames.shape[0]
    if latents is None:
        if mode == "standard":
            raise ContractError("standard mode needs future latents")
        latents = np.zeros((b, cfg.n_future_tokens, cfg.latent_channels))
    mask = np.ones(b) if mode == "efficient" else np.zeros(b)
    indicator = np.ones(b)
    x = np.asarray(eps, dtype=np.float64).reshape(b, cfg.out_dim).copy()
    k = cfg.k_euler
    for step in range(k):
        tau_k = np.full(b, step / k)
        v = policy_velocity(params, cfg, frames, proprio, latents, mask,
                            indicator, x, tau_k)
        x = x + v.data / k
    return x.reshape(b, cfg.chunk_len, cfg.action_dim)
