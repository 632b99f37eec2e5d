"""Task registry: uniform interface over the GridPack and PushBox variants."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import gridpack, pushbox
from ..numerics import Rng


@dataclass
class Task:
    name: str
    family: str                 # "gridpack" | "pushbox"
    config: Any
    action_dim: int
    proprio_dim: int
    _oracle: Any = field(default=None, repr=False)

    @property
    def frame_shape(self) -> tuple[int, int, int]:
        s = self.config.frame_size
        return (3, s, s)

    @property
    def max_steps(self) -> int:
        return self.config.max_steps

    @property
    def c_fail(self) -> float:
        return self.config.c_fail

    @property
    def a_max(self) -> float:
        """Largest per-component action magnitude; one-hot discrete chunks
        change by at most 1 per component."""
        return 1.0 if self.family == "gridpack" else self.config.a_max

    def reset(self, rng: Rng):
        if self.family == "gridpack":
            return gridpack.random_instance(self.config, rng)
        return pushbox.random_instance(self.config, rng)

    def step(self, state, action_vec: np.ndarray):
        if self.family == "gridpack":
            return gridpack.step(self.config, state, int(np.argmax(action_vec)))
        a = np.clip(np.asarray(action_vec, dtype=np.float64),
                    -self.config.a_max, self.config.a_max)
        return pushbox.step(self.config, state, a)

    def render(self, state) -> np.ndarray:
        if self.family == "gridpack":
            return gridpack.render(state, self.config.frame_size)
        return pushbox.render(self.config, state)

    def proprio(self, state) -> np.ndarray:
        if self.family == "gridpack":
            return gridpack.proprio(state)
        return pushbox.proprio(state)

    def expert_action(self, state) -> np.ndarray:
        """Expert action in executed-vector form (one-hot for gridpack)."""
        if self.family == "gridpack":
            action, improving = self.oracle.expert_action(state)
            vec = np.zeros(self.action_dim)
            if improving:
                vec[action] = 1.0
            return vec
        return pushbox.expert_action(self.config, state)

    @property
    def oracle(self) -> gridpack.GridOracle:
        if self.family != "gridpack":
            raise gridpack.UnsupportedFamilyError(
                f"task {self.name} has no exact value oracle")
        if self._oracle is None:
            self._oracle = gridpack.GridOracle(self.config)
        return self._oracle

    def oracle_value(self, state) -> float:
        return self.oracle.value(state)


def make_task(name: str, **overrides) -> Task:
    if name == "place-one":
        cfg = gridpack.GridPackConfig(n_items=1, **overrides)
        return Task(name, "gridpack", cfg, gridpack.N_ACTIONS, gridpack.PROPRIO_DIM)
    if name == "place-two":
        cfg = gridpack.GridPackConfig(n_items=2, **overrides)
        return Task(name, "gridpack", cfg, gridpack.N_ACTIONS, gridpack.PROPRIO_DIM)
    if name == "push-to-goal":
        cfg = pushbox.PushBoxConfig(require_home=False, **overrides)
        return Task(name, "pushbox", cfg, 2, pushbox.PROPRIO_DIM)
    if name == "push-then-place":
        cfg = pushbox.PushBoxConfig(require_home=True, **overrides)
        return Task(name, "pushbox", cfg, 2, pushbox.PROPRIO_DIM)
    raise KeyError(f"unknown task {name!r}")


TASK_NAMES = ("place-one", "place-two", "push-to-goal", "push-then-place")
