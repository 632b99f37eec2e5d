"""Stitching supervised takeovers into smooth training episodes.

Control handoffs (policy->supervisor and back) produce jerky transition
steps. Around every handoff boundary a symmetric window of steps is removed;
if the actions across the resulting seam still differ by more than the
actuation limit, the window widens. Episodes whose seams cannot be smoothed
are dropped.
"""
from __future__ import annotations

from dataclasses import replace

import numpy as np

from ..envs import EpisodeRecord, reward_sequence


def handoff_boundaries(intervention: np.ndarray) -> list[int]:
    """Indices i where control changed hands between steps i-1 and i."""
    flags = np.asarray(intervention)
    return [int(i) for i in np.nonzero(flags[1:] != flags[:-1])[0] + 1]


def _kept_indices(length: int, boundaries: list[int], widths: list[int]):
    removed = np.zeros(length, dtype=bool)
    for b, w in zip(boundaries, widths):
        removed[max(b - w, 0):min(b + w, length)] = True
    removed[-1] = False          # the terminal step carries the outcome
    return np.nonzero(~removed)[0]


def _seam_deltas(actions: np.ndarray, kept: np.ndarray):
    """(seam position in kept order, max action delta) for each splice."""
    out = []
    for j in range(1, len(kept)):
        if kept[j] != kept[j - 1] + 1:
            delta = float(np.max(np.abs(actions[kept[j]] - actions[kept[j - 1]])))
            out.append((j, delta))
    return out


def stitch_interventions(episode: EpisodeRecord, a_max: float,
                         window: int = 3, max_window: int = 10):
    """Splice out handoff transitions; returns the stitched episode or None
    when no window up to max_window yields seams within a_max."""
    boundaries = handoff_boundaries(episode.intervention)
    if not boundaries:
        return episode
    widths = [window] * len(boundaries)
    while True:
        kept = _kept_indices(episode.length, boundaries, widths)
        if len(kept) < 2:
            return None
        bad = [s for s in _seam_deltas(episode.actions, kept) if s[1] > a_max]
        if not bad:
            break
        grown = False
        for j, _ in bad:
            # widen the boundary responsible for this seam
            seam_step = int(kept[j])
            b_idx = int(np.argmin([abs(b - seam_step) for b in boundaries]))
            if widths[b_idx] < max_window:
                widths[b_idx] += 1
                grown = True
        if not grown:
            return None
    return replace(
        episode,
        frames=episode.frames[kept],
        proprio=episode.proprio[kept],
        actions=episode.actions[kept],
        # rewards are regenerated for the shorter sequence; the stitched
        # record is a training artifact, not a faithful trajectory
        rewards=reward_sequence(len(kept), episode.outcome, episode.c_fail),
        intervention=episode.intervention[kept],
        meta={**episode.meta, "stitched_from": episode.length,
              "stitch_windows": widths},
    )


def max_seam_delta(episode: EpisodeRecord, stitched: EpisodeRecord) -> float:
    """Largest action discontinuity across the splices of a stitched episode."""
    boundaries = handoff_boundaries(episode.intervention)
    widths = stitched.meta.get("stitch_windows")
    kept = _kept_indices(episode.length, boundaries, widths)
    deltas = [d for _, d in _seam_deltas(episode.actions, kept)]
    return max(deltas) if deltas else 0.0
