"""Latent grid layout: packing values and proprioception into the spatial
latent as tiled planes, and reading them back out.

A latent is token-major: shape (..., L, C) where L = hz * wz spatial tokens
in row-major grid order. Packing appends one constant plane per scalar:
s = [z ; tile(v) ; tile(p)].
"""
from __future__ import annotations

import numpy as np

from ..numerics import ContractError


def tile_plane(values, n_tokens: int) -> np.ndarray:
    """Tile per-sample scalars/vectors into constant token planes.

    (B,) -> (B, L, 1);  (B, d) -> (B, L, d).
    """
    v = np.asarray(values, dtype=np.float64)
    if v.ndim == 1:
        v = v[:, None]
    if v.ndim != 2:
        raise ContractError(f"tile_plane expects (B,) or (B, d), got {v.shape}")
    return np.repeat(v[:, None, :], n_tokens, axis=1)


def pack_state(z: np.ndarray, v, p) -> np.ndarray:
    """[z ; tile(v) ; tile(p)] along the channel axis; z is (B, L, cz)."""
    if z.ndim != 3:
        raise ContractError(f"pack_state expects (B, L, cz), got {z.shape}")
    n_tokens = z.shape[1]
    return np.concatenate(
        [z, tile_plane(v, n_tokens), tile_plane(p, n_tokens)], axis=-1)


def unpack_state(s: np.ndarray, cz: int, d_p: int):
    """Inverse of pack_state: (z, v, p) with the plane channels averaged
    over tokens."""
    if s.ndim != 3 or s.shape[-1] != cz + 1 + d_p:
        raise ContractError(
            f"unpack_state: expected trailing extent {cz + 1 + d_p}, got {s.shape}")
    z = s[..., :cz]
    v = s[..., cz].mean(axis=-1)
    p = s[..., cz + 1:].mean(axis=-2)
    return z, v, p


def extract_patches(frames: np.ndarray, hz: int, wz: int) -> np.ndarray:
    """(B, C, H, W) -> (B, hz*wz, C*ph*pw) non-overlapping patch rows."""
    if frames.ndim != 4:
        raise ContractError(f"extract_patches expects (B, C, H, W), got {frames.shape}")
    b, c, h, w = frames.shape
    if h % hz or w % wz:
        raise ContractError(f"frame {h}x{w} not divisible into {hz}x{wz} patches")
    ph, pw = h // hz, w // wz
    x = frames.reshape(b, c, hz, ph, wz, pw)
    x = x.transpose(0, 2, 4, 1, 3, 5)
    return x.reshape(b, hz * wz, c * ph * pw)
