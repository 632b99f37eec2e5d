"""n-step temporal-difference advantages, indicator discretization, and the
value-prediction metric suite."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .numerics import ContractError


@dataclass(frozen=True)
class AdvantageAnnotation:
    advantage: float
    indicator: int
    v_t: float
    v_tpn: float
    n: int
    gamma: float


def n_step_advantage(rewards, v_t: float, v_tpn: float, gamma: float) -> float:
    """A = sum_k gamma^k r_{t+k} + gamma^n v_{t+n} - v_t."""
    rewards = np.asarray(rewards, dtype=np.float64)
    n = rewards.shape[0]
    if n < 1:
        raise ContractError("n-step advantage needs at least one reward")
    discounts = gamma ** np.arange(n)
    return float(discounts @ rewards + gamma ** n * v_tpn - v_t)


def indicator(advantage: float, eps_thr: float = 0.0) -> int:
    """Binary improvement signal: strictly greater than the threshold."""
    return int(advantage > eps_thr)


def annotate_episode(rewards, values, chunk_len: int, gamma: float = 0.99,
                     eps_thr: float = 0.0) -> list[AdvantageAnnotation]:
    """One annotation per action chunk.

    ``values[t]`` estimates the state value before step t. Past the episode
    end the bootstrap value is 0: the terminal reward (0 or -C_fail) already
    carries the outcome.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    T = rewards.shape[0]
    out = []
    for t in range(0, T, chunk_len):
        n = min(chunk_len, T - t)
        v_tpn = float(values[t + n]) if t + n < T else 0.0
        a = n_step_advantage(rewards[t:t + n], float(values[t]), v_tpn, gamma)
        out.append(AdvantageAnnotation(a, indicator(a, eps_thr),
                                       float(values[t]), v_tpn, n, gamma))
    return out


def kendall_tau(pred, truth) -> float:
    """Tau-b rank correlation (tie-corrected), in [-1, 1]."""
    x = np.asarray(pred, dtype=np.float64)
    y = np.asarray(truth, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ContractError(f"kendall_tau needs two equal-length vectors, "
                            f"got {x.shape} and {y.shape}")
    n = x.shape[0]
    if n < 2:
        raise ContractError("kendall_tau needs length >= 2")
    sx = np.sign(x[:, None] - x[None, :])
    sy = np.sign(y[:, None] - y[None, :])
    iu = np.triu_indices(n, k=1)
    prod = sx[iu] * sy[iu]
    concordant = np.sum(prod > 0)
    discordant = np.sum(prod < 0)
    n0 = n * (n - 1) / 2
    ties_x = n0 - np.sum(sx[iu] != 0)
    ties_y = n0 - np.sum(sy[iu] != 0)
    denom = np.sqrt((n0 - ties_x) * (n0 - ties_y))
    if denom == 0:
        return 0.0
    return float((concordant - discordant) / denom)


def value_metrics(pred, truth) -> dict:
    """MAE / MSE / RMSE / Kendall on [0,1]-normalized values."""
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape or pred.ndim != 1 or pred.size == 0:
        raise ContractError(f"value_metrics length mismatch: "
                            f"{pred.shape} vs {truth.shape}")
    err = pred - truth
    mse = float(np.mean(err ** 2))
    return {
        "mae": float(np.mean(np.abs(err))),
        "mse": mse,
        "rmse": float(np.sqrt(mse)),
        "kendall": kendall_tau(pred, truth),
    }


METRIC_COLUMNS = ("model", "inference_ms", "mae", "mse", "rmse", "kendall")


def render_metrics_table(rows: list[dict]) -> str:
    """Fixed-width text table over the standard metric columns."""
    header = f"{'model':<24}{'inference_ms':>14}{'MAE':>10}{'MSE':>10}{'RMSE':>10}{'Kendall':>10}"
    lines = [header, "-" * len(header)]
    for r in rows:
        lines.append(
            f"{r['model']:<24}{r.get('inference_ms', float('nan')):>14.2f}"
            f"{r['mae']:>10.4f}{r['mse']:>10.4f}{r['rmse']:>10.4f}{r['kendall']:>10.4f}"
        )
    return "\n".join(lines)


def write_metrics_jsonl(rows: list[dict], path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        for r in rows:
            f.write(json.dumps(r, sort_keys=True) + "\n")
