"""PushBox: a continuous-action pushing environment on the unit square.

The agent nudges a box toward a goal with bounded 2-D displacement actions.
When the agent overlaps the box, a fraction kappa of its displacement
transfers to the box. The push-then-place variant additionally requires the
agent to return home after the box reaches the goal.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..numerics import ContractError


@dataclass(frozen=True)
class PushBoxConfig:
    a_max: float = 0.1
    kappa: float = 0.8
    contact_radius: float = 0.12
    goal_tol: float = 0.08
    max_steps: int = 50
    frame_size: int = 32
    require_home: bool = False          # push-then-place variant
    home: tuple[float, float] = (0.1, 0.1)

    @property
    def c_fail(self) -> float:
        return 2.0 * self.max_steps


@dataclass(frozen=True)
class PushBoxState:
    agent: tuple[float, float]
    box: tuple[float, float]
    goal: tuple[float, float]
    vel: tuple[float, float] = (0.0, 0.0)
    step_index: int = 0


def _clip01(p) -> tuple[float, float]:
    return (float(np.clip(p[0], 0.0, 1.0)), float(np.clip(p[1], 0.0, 1.0)))


def _dist(a, b) -> float:
    return float(np.hypot(a[0] - b[0], a[1] - b[1]))


def is_success(config: PushBoxConfig, state: PushBoxState) -> bool:
    if _dist(state.box, state.goal) > config.goal_tol:
        return False
    if config.require_home:
        return _dist(state.agent, config.home) <= config.goal_tol
    return True


def step(config: PushBoxConfig, state: PushBoxState, action):
    """Deterministic transition; the box moves by kappa * action while the
    agent starts in contact with it."""
    action = np.asarray(action, dtype=np.float64)
    if action.shape != (2,):
        raise ContractError(f"PushBox action must be 2-D, got shape {action.shape}")
    if np.any(np.abs(action) > config.a_max + 1e-12):
        raise ContractError(f"action {action} exceeds a_max={config.a_max}")
    # the box is pushed, never pulled: it moves only when the agent starts in
    # contact and the action does not point away from it
    contact = _dist(state.agent, state.box) <= config.contact_radius
    into = (action[0] * (state.box[0] - state.agent[0])
            + action[1] * (state.box[1] - state.agent[1])) >= 0.0
    agent = _clip01((state.agent[0] + action[0], state.agent[1] + action[1]))
    box = state.box
    if contact and into:
        box = _clip01((box[0] + config.kappa * action[0],
                       box[1] + config.kappa * action[1]))
    nxt = PushBoxState(agent, box, state.goal, (float(action[0]), float(action[1])),
                       state.step_index + 1)
    if is_success(config, nxt):
        return nxt, True, "success"
    if nxt.step_index >= config.max_steps:
        return nxt, True, "failure"
    return nxt, False, None


def render(config: PushBoxConfig, state: PushBoxState) -> np.ndarray:
    """3 x S x S raster: discs for agent, box and goal."""
    s = config.frame_size
    yy, xx = np.mgrid[0:s, 0:s]
    frame = np.zeros((3, s, s))
    r = s / 10.0
    for ch, pos in enumerate((state.agent, state.box, state.goal)):
        cx, cy = pos[0] * (s - 1), pos[1] * (s - 1)
        frame[ch] = ((xx - cx) ** 2 + (yy - cy) ** 2 <= r * r).astype(np.float64)
    return frame


def proprio(state: PushBoxState) -> np.ndarray:
    return np.array([state.agent[0], state.agent[1], state.vel[0], state.vel[1]])


PROPRIO_DIM = 4


def random_instance(config: PushBoxConfig, rng) -> PushBoxState:
    """Random instance with box and goal separated and away from walls."""
    agent = tuple(rng.uniform(0.1, 0.9, (2,)))
    while True:
        box = tuple(rng.uniform(0.25, 0.75, (2,)))
        goal = tuple(rng.uniform(0.25, 0.75, (2,)))
        if _dist(box, goal) > 2 * config.goal_tol:
            break
    return PushBoxState(agent, box, goal, (0.0, 0.0), 0)


def expert_action(config: PushBoxConfig, state: PushBoxState) -> np.ndarray:
    """Greedy documented controller: stand behind the box relative to the
    goal, then push along the box-to-goal direction; head home afterwards in
    the push-then-place variant."""
    agent = np.array(state.agent)
    box = np.array(state.box)

    def walk(target, push_ok=None):
        """Step toward ``target``; detour when the step would push the box in
        a direction other than ``push_ok``."""
        step = np.clip(target - agent, -config.a_max, config.a_max)
        to_box = box - agent
        pushes = (_dist(state.agent, state.box) <= config.contact_radius
                  and float(step @ to_box) > 0.0)
        if pushes:
            n = np.hypot(*step)
            ok = (push_ok is not None and n > 1e-9
                  and float(step @ push_ok) / n > 0.3)
            if not ok:
                perp = np.array([-to_box[1], to_box[0]])
                pn = np.hypot(*perp)
                perp = perp / pn if pn > 1e-9 else np.array([1.0, 0.0])
                if float(perp @ (target - agent)) < 0:
                    perp = -perp
                step = np.clip(perp * config.a_max, -config.a_max, config.a_max)
        return step

    if _dist(state.box, state.goal) <= config.goal_tol * 0.8:
        if config.require_home:
            return walk(np.array(config.home))
        return np.zeros(2)
    d = np.array([state.goal[0] - state.box[0], state.goal[1] - state.box[1]])
    d /= max(np.hypot(*d), 1e-9)
    stand = box - d * config.contact_radius * 0.6
    ahead = float((agent - box) @ d)
    if (_dist(state.agent, state.box) <= config.contact_radius
            and ahead <= -0.15 * config.contact_radius):
        gap = _dist(state.box, state.goal)
        push = min(config.a_max, (gap - 0.4 * config.goal_tol) / config.kappa)
        return np.clip(d * max(push, 0.0), -config.a_max, config.a_max)
    return walk(stand, push_ok=d)
