"""Experiment configuration: a YAML file mapped onto typed sections with
validated invariants, hashed for content-addressed artifact directories."""
from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from ..envs import TASK_NAMES
from ..numerics import ContractError
from ..policy import PolicyConfig
from ..worldmodel import WorldModelConfig


@dataclass(frozen=True)
class EnvSection:
    width: int = 4
    height: int = 4


@dataclass(frozen=True)
class AdvantageSection:
    gamma: float = 0.99
    eps_thr: float = 0.0


@dataclass(frozen=True)
class LoopSection:
    rounds: int = 2
    episodes_per_round: int = 16
    mixing_ratio: float = 0.5       # HILR share of the stage-4 training mix


@dataclass(frozen=True)
class DataSection:
    episodes: int = 64              # base expert corpus size
    eval_episodes: int = 16         # fixed-seed evaluation episodes per task


@dataclass(frozen=True)
class BaselineSection:
    beta: float = 1.0
    w_max: float = 20.0


@dataclass(frozen=True)
class ExperimentConfig:
    tasks: tuple[str, ...] = ("place-one",)
    seeds: tuple[int, ...] = (0,)
    env: EnvSection = field(default_factory=EnvSection)
    worldmodel: WorldModelConfig = field(default_factory=WorldModelConfig)
    policy: PolicyConfig = field(default_factory=lambda: PolicyConfig(action_dim=6))
    advantage: AdvantageSection = field(default_factory=AdvantageSection)
    loop: LoopSection = field(default_factory=LoopSection)
    data: DataSection = field(default_factory=DataSection)
    baseline: BaselineSection = field(default_factory=BaselineSection)

    def validate(self) -> "ExperimentConfig":
        if not self.tasks:
            raise ContractError("config needs at least one task")
        for t in self.tasks:
            if t not in TASK_NAMES:
                raise ContractError(f"unknown task {t!r}; known: {TASK_NAMES}")
        if not 0.0 <= self.policy.mask_prob <= 1.0:
            raise ContractError(
                f"mask_prob must lie in [0, 1], got {self.policy.mask_prob}")
        if not 0.0 < self.loop.mixing_ratio <= 1.0:
            raise ContractError(
                f"mixing ratio must lie in (0, 1], got {self.loop.mixing_ratio}")
        if not 0.0 < self.advantage.gamma <= 1.0:
            raise ContractError(
                f"gamma must lie in (0, 1], got {self.advantage.gamma}")
        if self.loop.rounds < 1:
            raise ContractError(f"rounds must be >= 1, got {self.loop.rounds}")
        if not self.seeds:
            raise ContractError("config needs at least one seed")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    def config_hash(self) -> str:
        """Content hash over the full canonical config; any field change
        changes the hash."""
        canon = json.dumps(self.to_dict(), sort_keys=True, default=list)
        return hashlib.sha256(canon.encode()).hexdigest()[:12]


def _build_section(cls, raw: dict, label: str):
    known = {f.name for f in fields(cls)}
    unknown = set(raw) - known
    if unknown:
        raise ContractError(f"unknown {label} config keys: {sorted(unknown)}")
    coerced = {}
    for f in fields(cls):
        if f.name not in raw:
            continue
        v = raw[f.name]
        coerced[f.name] = tuple(v) if isinstance(v, list) else v
    if cls is PolicyConfig:
        # action_dim and latent_channels are derived from the task and the
        # world model at stage time; the file need not state them
        coerced.setdefault("action_dim", 6)
    return cls(**coerced)


def load_config(path) -> ExperimentConfig:
    raw = yaml.safe_load(Path(path).read_text()) or {}
    if not isinstance(raw, dict):
        raise ContractError(f"config root must be a mapping, got {type(raw)}")
    known = {"tasks", "seeds", "env", "worldmodel", "policy", "advantage",
             "loop", "data", "baseline"}
    unknown = set(raw) - known
    if unknown:
        raise ContractError(f"unknown config sections: {sorted(unknown)}")
    kwargs = {}
    if "tasks" in raw:
        kwargs["tasks"] = tuple(raw["tasks"])
    if "seeds" in raw:
        kwargs["seeds"] = tuple(int(s) for s in raw["seeds"])
    sections = {
        "env": EnvSection, "worldmodel": WorldModelConfig,
        "policy": PolicyConfig, "advantage": AdvantageSection,
        "loop": LoopSection, "data": DataSection, "baseline": BaselineSection,
    }
    for name, cls in sections.items():
        if name in raw:
            kwargs[name] = _build_section(cls, raw[name] or {}, name)
    if "policy" not in kwargs:
        kwargs["policy"] = PolicyConfig(action_dim=6)
    return ExperimentConfig(**kwargs).validate()


def data_root() -> Path:
    """Artifact root; the RAMP_DATA_DIR environment variable overrides it."""
    return Path(os.environ.get("RAMP_DATA_DIR", "ramp_data"))


def artifact_dir(cfg: ExperimentConfig, seed: int) -> Path:
    return data_root() / f"{cfg.config_hash()}-s{seed}"
