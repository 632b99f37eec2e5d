"""Flat binary parameter container.

Layout: magic ``RAMP``, version u32, then per-parameter records
{name length u32, name bytes, rank u32, extents u32 x rank, little-endian f64 payload}.
All integers little-endian.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"RAMP"
VERSION = 1


class CheckpointError(RuntimeError):
    pass


def save_arrays(arrays: dict[str, np.ndarray], path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", VERSION))
        for name, arr in arrays.items():
            arr = np.asarray(arr, dtype="<f8")
            nb = name.encode("utf-8")
            f.write(struct.pack("<I", len(nb)))
            f.write(nb)
            f.write(struct.pack("<I", arr.ndim))
            for ext in arr.shape:
                f.write(struct.pack("<I", ext))
            f.write(arr.tobytes())


def load_arrays(path) -> dict[str, np.ndarray]:
    with open(path, "rb") as f:
        blob = f.read()
    return parse_container(blob, str(path))


def parse_container(blob: bytes, origin: str = "<bytes>") -> dict[str, np.ndarray]:
    if blob[:4] != MAGIC:
        raise CheckpointError(f"{origin}: bad magic {blob[:4]!r}")
    (version,) = struct.unpack_from("<I", blob, 4)
    if version != VERSION:
        raise CheckpointError(f"{origin}: version {version}, expected {VERSION}")
    out: dict[str, np.ndarray] = {}
    off = 8
    n = len(blob)
    while off < n:
        if off + 4 > n:
            raise CheckpointError(f"{origin}: truncated record header")
        (nlen,) = struct.unpack_from("<I", blob, off)
        off += 4
        if off + nlen + 4 > n:
            raise CheckpointError(f"{origin}: truncated record name")
        name = blob[off:off + nlen].decode("utf-8")
        off += nlen
        (rank,) = struct.unpack_from("<I", blob, off)
        off += 4
        if off + 4 * rank > n:
            raise CheckpointError(f"{origin}: truncated extents for '{name}'")
        shape = struct.unpack_from(f"<{rank}I", blob, off) if rank else ()
        off += 4 * rank
        count = int(np.prod(shape)) if rank else 1
        nbytes = 8 * count
        if off + nbytes > n:
            raise CheckpointError(f"{origin}: truncated payload for '{name}'")
        arr = np.frombuffer(blob[off:off + nbytes], dtype="<f8").reshape(shape).copy()
        off += nbytes
        out[name] = arr
    return out
