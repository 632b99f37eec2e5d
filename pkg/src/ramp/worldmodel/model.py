"""Generative world model: a patch encoder plus a token-mixing trunk trained
with conditional flow matching to produce future packed latents.

The trunk is a flow vector field: given a noised future latent, the current
observation encoding, the interpolation time tau and a horizon offset, it
predicts the straight-line velocity (target minus noise). A single Euler step
from pure noise already yields a usable sample; more steps refine it.
"""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from ..numerics import ContractError, Tensor, concat, layer_norm
from .latent import extract_patches, pack_state, tile_plane


@dataclass(frozen=True)
class WorldModelConfig:
    hz: int = 4
    wz: int = 4
    cz: int = 8
    embed: int = 64
    hidden: int = 128
    depth: int = 2
    offsets: tuple[int, ...] = (2, 4, 6, 8)
    target: str = "state-value"         # or "value-only"
    value_mean: float = 0.0             # value-plane standardization: the raw
    value_scale: float = 1.0            # labels span ~2% of [0,1] and would
                                        # drown in unit flow noise otherwise
    lr: float = 1e-3
    batch_size: int = 32
    steps: int = 600

    @property
    def n_tokens(self) -> int:
        return self.hz * self.wz

    def target_channels(self, d_p: int) -> int:
        if self.target == "state-value":
            return self.cz + 1 + d_p
        if self.target == "value-only":
            return 1
        raise ContractError(f"unknown target mode {self.target!r}")

    def value_channel(self) -> int:
        return self.cz if self.target == "state-value" else 0


def init_params(cfg: WorldModelConfig, frame_shape, d_p: int, rng) -> dict:
    """He-style scaled normal initialization for every weight matrix."""
    c, h, w = frame_shape
    patch_dim = c * (h // cfg.hz) * (w // cfg.wz)
    cs = cfg.target_channels(d_p)
    f_in = cs + cfg.cz + d_p + 1 + len(cfg.offsets)

    def mat(name, rows, cols, params):
        scale = 1.0 / np.sqrt(rows)
        params[name] = Tensor(rng.split(name).normal((rows, cols)) * scale,
                              requires_grad=True)
        params[name + ".b"] = Tensor(np.zeros(cols), requires_grad=True)

    params: dict[str, Tensor] = {}
    mat("enc.w", patch_dim, cfg.cz, params)
    mat("in.w", f_in, cfg.embed, params)
    params["pos"] = Tensor(
        rng.split("pos").normal((cfg.n_tokens, cfg.embed)) * 0.02,
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
    mat("out.w", cfg.embed, cs, params)
    return params


def encode(params: dict, cfg: WorldModelConfig, frames: np.ndarray) -> Tensor:
    """Frames (B, C, H, W) -> latent tokens (B*L, cz), in the graph."""
    patches = extract_patches(np.asarray(frames, dtype=np.float64), cfg.hz, cfg.wz)
    b, l, d = patches.shape
    x = Tensor(patches.reshape(b * l, d))
    return (x @ params["enc.w"]).add_bias(params["enc.w.b"]).tanh()


def encode_array(params: dict, cfg: WorldModelConfig, frames: np.ndarray) -> np.ndarray:
    """Detached encoding as (B, L, cz); used for flow targets."""
    b = frames.shape[0]
    return encode(params, cfg, frames).detach().data.reshape(b, cfg.n_tokens, cfg.cz)


def _mixer_trunk(params: dict, cfg: WorldModelConfig, h: Tensor, b: int) -> Tensor:
    l, e = cfg.n_tokens, cfg.embed
    for d in range(cfg.depth):
        u = layer_norm(h, params[f"blk{d}.ln1.g"], params[f"blk{d}.ln1.b"])
        # token mixing: fold the batch into columns so the (L, L) weight acts
        # on the token axis with a plain 2-D matmul
        u = u.reshape(b, l, e).permute(1, 0, 2).reshape(l, b * e)
        u = params[f"blk{d}.tok.w"] @ u
        u = u.reshape(l, b, e).permute(1, 0, 2).reshape(b * l, e)
        h = h + u
        u = layer_norm(h, params[f"blk{d}.ln2.g"], params[f"blk{d}.ln2.b"])
        u = (u @ params[f"blk{d}.mlp1.w"]).add_bias(params[f"blk{d}.mlp1.w.b"]).tanh()
        u = (u @ params[f"blk{d}.mlp2.w"]).add_bias(params[f"blk{d}.mlp2.w.b"])
        h = h + u
    return h


def velocity_field(params: dict, cfg: WorldModelConfig, x_tau: np.ndarray,
                   cond_z: Tensor, proprio: np.ndarray, tau: np.ndarray,
                   offset_idx: np.ndarray) -> Tensor:
    """Predicted flow velocity, shape (B*L, cs).

    x_tau: noised future latent (B, L, cs); cond_z: current-frame encoding
    (B*L, cz) carrying encoder gradients; tau in [0, 1] per sample.
    """
    tau = np.asarray(tau, dtype=np.float64)
    if np.any(tau < 0) or np.any(tau > 1):
        raise ContractError(f"tau must lie in [0, 1], got range "
                            f"[{tau.min()}, {tau.max()}]")
    b, l, cs = x_tau.shape
    if l != cfg.n_tokens:
        raise ContractError(f"expected {cfg.n_tokens} tokens, got {l}")
    one_hot = np.zeros((b, len(cfg.offsets)))
    one_hot[np.arange(b), np.asarray(offset_idx, dtype=np.int64)] = 1.0
    extras = np.concatenate([
        tile_plane(proprio, l), tile_plane(tau, l), tile_plane(one_hot, l),
    ], axis=-1).reshape(b * l, -1)
    h = concat([Tensor(x_tau.reshape(b * l, cs)), cond_z, Tensor(extras)], axis=1)
    h = (h @ params["in.w"]).add_bias(params["in.w.b"])
    h = h + params["pos"].index_rows(np.tile(np.arange(l), b))
    h = _mixer_trunk(params, cfg, h, b)
    h = layer_norm(h, params["out.ln.g"], params["out.ln.b"])
    return (h @ params["out.w"]).add_bias(params["out.w.b"])


def make_targets(params: dict, cfg: WorldModelConfig, future_frames: np.ndarray,
                 future_values: np.ndarray, future_proprio: np.ndarray) -> np.ndarray:
    """Packed flow targets (B, L, cs); the encoding is detached so encoder
    gradients flow only through the conditioning path."""
    values = (np.asarray(future_values, dtype=np.float64)
              - cfg.value_mean) / cfg.value_scale
    if cfg.target == "value-only":
        return tile_plane(values, cfg.n_tokens)
    z = encode_array(params, cfg, future_frames)
    return pack_state(z, values, future_proprio)


def fm_loss(params: dict, cfg: WorldModelConfig, frames: np.ndarray,
            proprio: np.ndarray, targets: np.ndarray, offset_idx: np.ndarray,
            tau: np.ndarray, eps: np.ndarray) -> Tensor:
    """Conditional flow-matching loss: regress (target - noise) at the
    straight-line interpolation point tau*target + (1-tau)*noise."""
    tau = np.asarray(tau, dtype=np.float64)
    x_tau = tau[:, None, None] * targets + (1.0 - tau[:, None, None]) * eps
    cond = encode(params, cfg, frames)
    pred = velocity_field(params, cfg, x_tau, cond, proprio, tau, offset_idx)
    want = (targets - eps).reshape(pred.shape)
    return (pred - Tensor(want)).square().mean()


def predict(params: dict, cfg: WorldModelConfig, frames: np.ndarray,
            proprio: np.ndarray, offset_idx: np.ndarray, eps: np.ndarray,
            n_steps: int = 1) -> np.ndarray:
    """Sample future packed latents by Euler integration from noise.

    With n_steps=1 this is the single-step recipe: s_hat = eps + field(eps).
    The tau grid uses left endpoints, so tau=1 is never evaluated.
    """
    if n_steps < 1:
        raise ContractError(f"n_steps must be >= 1, got {n_steps}")
    b = frames.shape[0]
    cond = encode(params, cfg, frames)
    x = np.array(eps, dtype=np.float64)
    for k in range(n_steps):
        tau_k = np.full(b, k / n_steps)
        v = velocity_field(params, cfg, x, cond, proprio, tau_k, offset_idx)
        x = x + v.data.reshape(x.shape) / n_steps
    return x


def value_estimates(cfg: WorldModelConfig, s_hat: np.ndarray) -> np.ndarray:
    """Read the predicted normalized value off the tiled value plane,
    undoing the training-time standardization."""
    plane = s_hat[..., cfg.value_channel()].mean(axis=-1)
    return plane * cfg.value_scale + cfg.value_mean
