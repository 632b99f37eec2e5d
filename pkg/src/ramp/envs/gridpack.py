"""GridPack: a tabular pick-and-place environment on a small grid.

The agent moves on a W x H grid, grasps items and releases them onto their
matching target cells. Episodes succeed when every item sits on its target
and nothing is carried. Exact shortest-path values are available through
:class:`GridOracle`.
"""
from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, replace

import numpy as np

from ..numerics import ContractError

UP, DOWN, LEFT, RIGHT, GRASP, RELEASE = range(6)
ACTION_NAMES = ("up", "down", "left", "right", "grasp", "release")
_MOVES = {UP: (0, -1), DOWN: (0, 1), LEFT: (-1, 0), RIGHT: (1, 0)}

N_ACTIONS = 6


class UnsupportedFamilyError(TypeError):
    """Tabular-only operation called on a continuous state."""


@dataclass(frozen=True)
class GridPackConfig:
    width: int = 5
    height: int = 5
    n_items: int = 1
    max_steps: int = 50
    frame_size: int = 16
    # C_fail = 2 * max_steps keeps every failure return below every success return
    @property
    def c_fail(self) -> float:
        return 2.0 * self.max_steps


@dataclass(frozen=True)
class GridPackState:
    width: int
    height: int
    agent: tuple[int, int]
    items: tuple[tuple[int, int], ...]
    targets: tuple[tuple[int, int], ...]
    carrying: int | None
    step_index: int = 0

    def key(self):
        return (self.agent, self.items, self.carrying)


def is_success(state: GridPackState) -> bool:
    return state.carrying is None and state.items == state.targets


def _apply(state: GridPackState, action: int) -> GridPackState:
    """Transition without step bookkeeping; invalid moves are no-ops."""
    agent = state.agent
    items = list(state.items)
    carrying = state.carrying
    if action in _MOVES:
        dx, dy = _MOVES[action]
        nx, ny = agent[0] + dx, agent[1] + dy
        if 0 <= nx < state.width and 0 <= ny < state.height:
            agent = (nx, ny)
            if carrying is not None:
                items[carrying] = agent
    elif action == GRASP:
        if carrying is None:
            for i, cell in enumerate(items):
                if cell == state.agent and cell != state.targets[i]:
                    carrying = i
                    break
    elif action == RELEASE:
        if carrying is not None:
            occupied = any(cell == state.agent for i, cell in enumerate(items)
                           if i != carrying)
            if not occupied:
                carrying = None
    return replace(state, agent=agent, items=tuple(items), carrying=carrying)


def step(config: GridPackConfig, state: GridPackState, action: int):
    """Returns (state', done, outcome-if-done). Truncation counts as failure."""
    if not isinstance(action, (int, np.integer)) or not 0 <= action < N_ACTIONS:
        raise ContractError(f"invalid GridPack action {action!r}")
    nxt = _apply(state, int(action))
    nxt = replace(nxt, step_index=state.step_index + 1)
    if is_success(nxt):
        return nxt, True, "success"
    if nxt.step_index >= config.max_steps:
        return nxt, True, "failure"
    return nxt, False, None


def render(state: GridPackState, frame_size: int = 16) -> np.ndarray:
    """Deterministic 3 x S x S raster: agent / item / target channels in [0,1].

    Each grid cell maps to a pixel block; a carried item draws at half
    intensity on the item channel so carrying is observable.
    """
    frame = np.zeros((3, frame_size, frame_size))

    def block(cell):
        x, y = cell
        x0 = x * frame_size // state.width
        x1 = (x + 1) * frame_size // state.width
        y0 = y * frame_size // state.height
        y1 = (y + 1) * frame_size // state.height
        return slice(y0, y1), slice(x0, x1)

    ys, xs = block(state.agent)
    frame[0, ys, xs] = 1.0
    for i, cell in enumerate(state.items):
        ys, xs = block(cell)
        frame[1, ys, xs] = 0.5 if state.carrying == i else 1.0
    for cell in state.targets:
        ys, xs = block(cell)
        frame[2, ys, xs] = 1.0
    return frame


def proprio(state: GridPackState) -> np.ndarray:
    return np.array([
        state.agent[0] / max(state.width - 1, 1),
        state.agent[1] / max(state.height - 1, 1),
        0.0 if state.carrying is None else 1.0,
    ])


PROPRIO_DIM = 3


def random_instance(config: GridPackConfig, rng) -> GridPackState:
    """Random solvable instance: distinct cells for agent, items, targets."""
    cells = [(x, y) for x in range(config.width) for y in range(config.height)]
    picks = rng.choice(len(cells), size=1 + 2 * config.n_items, replace=False)
    agent = cells[int(picks[0])]
    items = tuple(cells[int(i)] for i in picks[1:1 + config.n_items])
    targets = tuple(cells[int(i)] for i in picks[1 + config.n_items:])
    return GridPackState(config.width, config.height, agent, items, targets, None, 0)


def _manhattan(a, b) -> int:
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


def bfs_distance(state: GridPackState) -> float:
    """Full state-graph BFS distance to success; independent reference path."""
    if is_success(state):
        return 0.0
    start = state.key()
    seen = {start}
    frontier = deque([(state, 0)])
    while frontier:
        s, d = frontier.popleft()
        for a in range(N_ACTIONS):
            n = _apply(s, a)
            if is_success(n):
                return float(d + 1)
            nk = n.key()
            if nk not in seen:
                seen.add(nk)
                frontier.append((n, d + 1))
    return np.inf


class GridOracle:
    """Exact steps-to-success distances.

    Movement is unobstructed, so the shortest plan decomposes into manhattan
    travel legs plus one grasp and one release per outstanding item; the
    minimum over handling orders is exact. Configurations where items block
    each other's targets fall back to full-graph BFS.
    """

    def __init__(self, config: GridPackConfig):
        self.config = config
        self._bfs_cache: dict = {}

    def distance(self, state) -> float:
        """Minimum actions to success, or inf if unreachable."""
        if not isinstance(state, GridPackState):
            raise UnsupportedFamilyError(
                f"oracle supports GridPackState only, got {type(state).__name__}")
        d = self._closed_form(state)
        if d is not None:
            return d
        key = (state.targets, state.key())
        if key not in self._bfs_cache:
            self._bfs_cache[key] = bfs_distance(state)
        return self._bfs_cache[key]

    def _closed_form(self, state: GridPackState) -> float | None:
        items = list(state.items)
        pos = state.agent
        cost = 0
        if state.carrying is not None:
            c = state.carrying
            tc = state.targets[c]
            blocker = any(i != c and cell == tc for i, cell in enumerate(items))
            if blocker:
                return None
            cost += _manhattan(pos, tc) + 1
            pos = tc
            items[c] = tc
        pending = [i for i, cell in enumerate(items)
                   if cell != state.targets[i] and i != state.carrying]
        if not pending:
            return float(cost)
        best = None
        for order in itertools.permutations(pending):
            cur = list(items)
            p = pos
            c2 = cost
            feasible = True
            for i in order:
                t = state.targets[i]
                if any(j != i and cur[j] == t for j in range(len(cur))):
                    feasible = False
                    break
                c2 += _manhattan(p, cur[i]) + 1 + _manhattan(cur[i], t) + 1
                p = t
                cur[i] = t
            if feasible and (best is None or c2 < best):
                best = c2
        if best is None:
            return None
        return float(best)

    def value(self, state, max_steps: int | None = None) -> float:
        """-k* if success reachable within the remaining budget, else
        -(remaining budget) - C_fail."""
        max_steps = self.config.max_steps if max_steps is None else max_steps
        k = self.distance(state)
        remaining = max_steps - state.step_index
        if k <= remaining:
            return -float(k)
        return -float(remaining) - self.config.c_fail

    def expert_action(self, state: GridPackState):
        """(action, improving): first action in the fixed order that moves one
        step closer to success; (None, False) when no action improves."""
        d = self.distance(state)
        if not np.isfinite(d) or d == 0:
            return None, False
        for a in range(N_ACTIONS):
            n = _apply(state, a)
            if self.distance(replace(n, step_index=state.step_index + 1)) == d - 1:
                return a, True
        return None, False
