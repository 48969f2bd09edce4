"""Per-variable relevance to the target, used to order guided variable insertion."""

from __future__ import annotations

import math

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import digamma

from .numeric import Dataset

METRICS = ("correlation", "mutual_information", "both")


class InvalidMetric(ValueError):
    pass


def _scale(v: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    std = v.std()
    out = v / std if std > 0 else v.copy()
    # tiny seeded jitter breaks ties between repeated values
    out = out + 1e-10 * max(1.0, float(np.mean(np.abs(out)))) * rng.standard_normal(out.shape[0])
    return out


def mutual_information(x: np.ndarray, y: np.ndarray, k: int = 3, seed: int = 0) -> float:
    """Kraskov-Stoegbauer-Grassberger estimate (first variant) in nats,
    with Chebyshev distances; negative estimates are clipped to zero."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.shape[0]
    if n <= k:
        raise ValueError(f"need more than {k} samples")
    rng = np.random.default_rng(seed)
    xs = _scale(x, rng)
    ys = _scale(y, rng)
    joint = np.column_stack([xs, ys])
    dist, _ = cKDTree(joint).query(joint, k=k + 1, p=np.inf)
    radius = np.nextafter(dist[:, -1], 0)
    nx = cKDTree(xs[:, None]).query_ball_point(xs[:, None], radius, p=np.inf, return_length=True) - 1.0
    ny = cKDTree(ys[:, None]).query_ball_point(ys[:, None], radius, p=np.inf, return_length=True) - 1.0
    mi = digamma(n) + digamma(k) - np.mean(digamma(nx + 1)) - np.mean(digamma(ny + 1))
    return max(0.0, float(mi))


def _abs_pearson(x: np.ndarray, y: np.ndarray) -> float:
    dx = x - x.mean()
    dy = y - y.mean()
    denom = math.sqrt(float(np.dot(dx, dx)) * float(np.dot(dy, dy)))
    if denom == 0.0:
        raise ValueError("zero variance")
    return min(abs(float(np.dot(dx, dy)) / denom), 1.0)


def assess_relevance(d: Dataset, metric: str = "both", seed: int = 0) -> dict[str, float]:
    """Score every variable; an estimator failure scores 0 for that variable."""
    if metric not in METRICS:
        raise InvalidMetric(f"unknown relevance metric {metric!r}; expected one of {METRICS}")
    scores = {}
    for name, column in d.variables.items():
        try:
            if metric == "correlation":
                value = _abs_pearson(column, d.target)
            elif metric == "mutual_information":
                value = mutual_information(column, d.target, seed=seed)
            else:
                value = 0.5 * _abs_pearson(column, d.target) + 0.5 * mutual_information(column, d.target, seed=seed)
        except (ValueError, FloatingPointError):
            value = 0.0
        scores[name] = value if math.isfinite(value) else 0.0
    return scores


def sort_by_relevance(scores: dict[str, float]) -> list[str]:
    return sorted(scores, key=lambda name: (-scores[name], name))
