"""Rollout collection with optional supervisor takeovers.

A rollout interleaves policy-proposed action chunks with per-step actions
from an intervention source. Steps taken under intervention are flagged so
downstream training can weight or stitch them.
"""
from __future__ import annotations

import numpy as np

from ..envs import EpisodeRecord, reward_sequence
from ..numerics import ContractError
from ..policy.model import sample_actions
from ..policy.train import future_latents_from_model


class InterventionSource:
    """Decides when to take control and which per-step actions to issue."""

    def start_episode(self, task, state) -> None:
        pass

    def observe(self, task, state, step: int) -> None:
        """Called once per step before the action is chosen."""

    def wants_control(self) -> bool:
        return False

    def action(self, task, state) -> np.ndarray:
        raise NotImplementedError


class NullSource(InterventionSource):
    """Never intervenes."""


class ScriptedSource(InterventionSource):
    """Oracle-watching supervisor: takes over when the oracle value drops by
    more than ``drop`` compared to ``window`` steps earlier, then drives the
    episode home with the scripted expert. A supervisor that handed control
    back to a policy it just had to rescue would thrash, so it keeps it."""

    def __init__(self, drop: float = 2.0, window: int = 5):
        self.drop = drop
        self.window = window
        self.values: list[float] = []
        self.controlling = False

    def start_episode(self, task, state) -> None:
        self.values = []
        self.controlling = False

    def observe(self, task, state, step: int) -> None:
        v = task.oracle_value(state)
        self.values.append(v)
        if (not self.controlling and len(self.values) > self.window
                and v < self.values[-1 - self.window] - self.drop):
            self.controlling = True

    def wants_control(self) -> bool:
        return self.controlling

    def action(self, task, state) -> np.ndarray:
        return task.expert_action(state)


class ExpertSource(InterventionSource):
    """Always in control, always the scripted expert."""

    def wants_control(self) -> bool:
        return True

    def action(self, task, state) -> np.ndarray:
        return task.expert_action(state)


def expert_corpus(task, n: int, chunk_len: int = 4, seed0: int = 0) -> list:
    """n scripted-expert demonstration episodes with distinct reset seeds.

    Demonstrations carry a zero intervention mask: the flag marks takeovers
    from a running policy, and there is no policy here.
    """
    from ..numerics import Rng

    episodes = []
    for i in range(n):
        seed = seed0 + i
        rec = run_rollout(task, lambda f, p: np.zeros((chunk_len, task.action_dim)),
                          ExpertSource(), seed, Rng(seed), chunk_len)
        rec.intervention[:] = 0
        episodes.append(rec)
    return episodes


def intervention_fraction(records) -> float:
    """Exact fraction of intervened steps across a batch of episodes."""
    flags = np.concatenate([r.intervention for r in records])
    return float(flags.mean())


def make_policy_runner(params, cfg, wm, rng, mode: str = "standard"):
    """Returns chunk_fn(frame, proprio) -> (chunk_len, action_dim) actions.

    wm is a (params, config) pair; it may be None in efficient mode, where
    the future latents are suppressed and never computed.
    """
    if mode == "standard" and wm is None:
        raise ContractError("standard mode needs a world model")

    def chunk_fn(frame, proprio):
        frames = frame[None]
        prop = np.asarray(proprio, dtype=np.float64)[None]
        if mode == "standard":
            wm_params, wm_cfg = wm
            latents = future_latents_from_model(wm_params, wm_cfg, frames,
                                                prop, rng.split("latent"))
        else:
            latents = None
        eps = rng.normal((1, cfg.out_dim))
        return sample_actions(params, cfg, frames, prop, latents, eps,
                              mode=mode)[0]

    return chunk_fn


def run_rollout(task, chunk_fn, source: InterventionSource, seed: int,
                rng, chunk_len: int) -> EpisodeRecord:
    """Roll one episode. ``chunk_fn(frame, proprio)`` proposes action chunks;
    the source may take control at any step, which discards the rest of the
    current chunk."""
    state = task.reset(rng.split("reset"))
    source.start_episode(task, state)
    frames, proprios, actions, flags = [], [], [], []
    pending: list[np.ndarray] = []
    outcome = None
    for step in range(task.max_steps):
        frame = task.render(state)
        prop = task.proprio(state)
        source.observe(task, state, step)
        if source.wants_control():
            a = np.asarray(source.action(task, state), dtype=np.float64)
            pending = []
            flag = 1
        else:
            if not pending:
                pending = list(chunk_fn(frame, prop))
            a = np.asarray(pending.pop(0), dtype=np.float64)
            flag = 0
        frames.append(frame)
        proprios.append(prop)
        actions.append(a)
        flags.append(flag)
        state, done, outcome = task.step(state, a)
        if done:
            break
    rewards = reward_sequence(len(frames), outcome, task.c_fail)
    return EpisodeRecord(
        task=task.name, seed=seed, frames=np.array(frames),
        proprio=np.array(proprios), actions=np.array(actions),
        chunk_len=chunk_len, rewards=rewards,
        intervention=np.array(flags, dtype=np.uint8),
        outcome=outcome, c_fail=task.c_fail,
    )
