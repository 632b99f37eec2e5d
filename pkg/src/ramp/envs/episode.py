"""Episode records, the sparse reward scheme, and on-disk persistence.

An episode with T executed steps stores frames/proprio/actions/rewards of
one shared length T. The terminal reward is 0 on success and -C_fail on
failure; every other reward is -1, so the value labels (undiscounted
return-to-go) count negative steps-to-completion.

Persistence is a line-delimited JSON file plus a sidecar binary blob (same
container framing as checkpoints) holding the dense arrays, referenced by
byte offset.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..numerics.checkpoint import MAGIC, VERSION, CheckpointError

SCHEMA_VERSION = 1

OUTCOMES = ("success", "failure", "truncated")


class EpisodeIOError(RuntimeError):
    pass


def reward(t: int, T: int, outcome: str, c_fail: float) -> float:
    """Sparse reward: 0 on terminal success, -C_fail on terminal failure, -1 otherwise."""
    if not 0 <= t <= T:
        raise ValueError(f"step {t} outside [0, {T}]")
    if t == T:
        return 0.0 if outcome == "success" else -float(c_fail)
    return -1.0


def reward_sequence(n_steps: int, outcome: str, c_fail: float) -> np.ndarray:
    return np.array([reward(t, n_steps - 1, outcome, c_fail) for t in range(n_steps)])


def return_to_go(rewards: np.ndarray) -> np.ndarray:
    """Undiscounted suffix sums: the per-step value labels."""
    return np.cumsum(rewards[::-1])[::-1].copy()


def normalize_value(v, max_steps: int, c_fail: float):
    """Map raw values onto the [0,1] reporting convention."""
    return np.clip(1.0 + np.asarray(v, dtype=np.float64) / (max_steps + c_fail), 0.0, 1.0)


def snap_value(v, max_steps: int, c_fail: float):
    """Project value estimates onto the admissible lattice.

    True normalized values are images of integer returns-to-go, so they lie
    on a grid with spacing 1/(max_steps + c_fail); decoding to the nearest
    grid point removes sub-spacing regression noise.
    """
    span = max_steps + c_fail
    return np.clip(np.round(np.asarray(v, dtype=np.float64) * span) / span, 0.0, 1.0)


@dataclass
class EpisodeRecord:
    task: str
    seed: int
    frames: np.ndarray          # (T, C, H, W) in [0,1]
    proprio: np.ndarray         # (T, d)
    actions: np.ndarray         # (T, action_dim), executed chunks flattened in time
    chunk_len: int
    rewards: np.ndarray         # (T,)
    intervention: np.ndarray    # (T,) 0/1
    outcome: str
    c_fail: float
    meta: dict = field(default_factory=dict)

    @property
    def length(self) -> int:
        return self.frames.shape[0]

    def values(self) -> np.ndarray:
        return return_to_go(self.rewards)

    def validate(self) -> None:
        T = self.length
        for name in ("proprio", "actions", "rewards", "intervention"):
            arr = getattr(self, name)
            if arr.shape[0] != T:
                raise ValueError(f"{name} length {arr.shape[0]} != frames length {T}")
        if self.outcome not in OUTCOMES:
            raise ValueError(f"unknown outcome {self.outcome!r}")
        if T == 0:
            raise ValueError("empty episode")
        if self.frames.min() < 0.0 or self.frames.max() > 1.0:
            raise ValueError("frames outside [0,1]")
        if self.outcome == "success" and self.rewards[-1] != 0.0:
            raise ValueError("successful episode must end with reward 0")
        if self.outcome == "failure" and self.rewards[-1] != -self.c_fail:
            raise ValueError("failed episode must end with reward -C_fail")
        if np.any(self.rewards[:-1] != -1.0):
            raise ValueError("non-terminal rewards must all be -1")
        if not set(np.unique(self.intervention)) <= {0, 1}:
            raise ValueError("intervention mask must be 0/1")

    def equals(self, other: "EpisodeRecord") -> bool:
        return (
            self.task == other.task and self.seed == other.seed
            and self.chunk_len == other.chunk_len and self.outcome == other.outcome
            and self.c_fail == other.c_fail and self.meta == other.meta
            and all(np.array_equal(getattr(self, k), getattr(other, k))
                    for k in ("frames", "proprio", "actions", "rewards", "intervention"))
        )


def _blob_path(path: Path) -> Path:
    return path.with_suffix(path.suffix + ".blob")


def _write_blob_record(f, name: str, arr: np.ndarray) -> None:
    arr = np.asarray(arr, dtype="<f8")
    nb = name.encode("utf-8")
    f.write(struct.pack("<I", len(nb)))
    f.write(nb)
    f.write(struct.pack("<I", arr.ndim))
    for ext in arr.shape:
        f.write(struct.pack("<I", ext))
    f.write(arr.tobytes())


def save_episodes(records: list[EpisodeRecord], path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    blob_path = _blob_path(path)
    lines = []
    with open(blob_path, "wb") as blob:
        blob.write(MAGIC)
        blob.write(struct.pack("<I", VERSION))
        for i, rec in enumerate(records):
            offset = blob.tell()
            _write_blob_record(blob, f"ep{i}/frames", rec.frames)
            _write_blob_record(blob, f"ep{i}/proprio", rec.proprio)
            _write_blob_record(blob, f"ep{i}/actions", rec.actions)
            lines.append(json.dumps({
                "schema_version": SCHEMA_VERSION,
                "task": rec.task,
                "seed": rec.seed,
                "chunk_len": rec.chunk_len,
                "rewards": rec.rewards.tolist(),
                "intervention": rec.intervention.astype(int).tolist(),
                "outcome": rec.outcome,
                "c_fail": rec.c_fail,
                "meta": rec.meta,
                "blob_offset": offset,
            }, sort_keys=True))
    with open(path, "w") as f:
        for line in lines:
            f.write(line + "\n")


def _read_blob_record(blob: bytes, off: int, origin: str):
    n = len(blob)
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
    nbytes = 8 * (int(np.prod(shape)) if rank else 1)
    if off + nbytes > n:
        raise CheckpointError(f"{origin}: truncated payload for '{name}'")
    arr = np.frombuffer(blob[off:off + nbytes], dtype="<f8").reshape(shape).copy()
    return name, arr, off + nbytes


def load_episodes(path) -> list[EpisodeRecord]:
    path = Path(path)
    blob_path = _blob_path(path)
    try:
        blob = blob_path.read_bytes()
        if blob[:4] != MAGIC:
            raise EpisodeIOError(f"{blob_path}: bad magic")
        records: list[EpisodeRecord] = []
        for lineno, line in enumerate(path.read_text().splitlines()):
            if not line.strip():
                continue
            doc = json.loads(line)
            version = doc.get("schema_version")
            if version != SCHEMA_VERSION:
                raise EpisodeIOError(
                    f"{path}:{lineno + 1}: schema version {version}, "
                    f"this reader supports {SCHEMA_VERSION}")
            off = doc["blob_offset"]
            arrays = {}
            for _ in range(3):
                name, arr, off = _read_blob_record(blob, off, str(blob_path))
                arrays[name.split("/")[-1]] = arr
            records.append(EpisodeRecord(
                task=doc["task"],
                seed=doc["seed"],
                frames=arrays["frames"],
                proprio=arrays["proprio"],
                actions=arrays["actions"],
                chunk_len=doc["chunk_len"],
                rewards=np.array(doc["rewards"], dtype=np.float64),
                intervention=np.array(doc["intervention"], dtype=np.uint8),
                outcome=doc["outcome"],
                c_fail=doc["c_fail"],
                meta=doc.get("meta", {}),
            ))
        return records
    except (CheckpointError, json.JSONDecodeError, KeyError, OSError) as exc:
        raise EpisodeIOError(f"failed to load episodes from {path}: {exc}") from exc
