"""Relief/ReliefF feature ranking and the forward-selection accuracy curve.

Weights contrast each sampled instance against its nearest same-class hits
and nearest other-class misses: features that differ across classes but not
within them gain weight. k=1 with two classes reproduces basic Relief.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np


@dataclass(frozen=True)
class ReliefConfig:
    iterations: int = 100
    neighbors: int = 1
    standardize: bool = True
    seed: int = 0

    def __post_init__(self) -> None:
        if self.iterations < 1:
            raise ValueError("iterations must be > 0")
        if self.neighbors < 1:
            raise ValueError("neighbors must be >= 1")


@dataclass(frozen=True)
class FeatureRanking:
    """Per-feature weights and the descending-weight ordering (ties: lower index)."""

    weights: np.ndarray
    order: np.ndarray

    def top(self, n: int) -> np.ndarray:
        return self.order[:n]


def _standardize(x: np.ndarray) -> np.ndarray:
    mu = x.mean(axis=0)
    sd = x.std(axis=0)
    sd = np.where(sd == 0.0, 1.0, sd)
    return (x - mu) / sd


def relieff_rank(X: np.ndarray, y: np.ndarray, cfg: ReliefConfig | None = None) -> FeatureRanking:
    """Rank features by ReliefF weights.

    Instances are sampled without replacement when iterations <= m, with
    replacement otherwise. Multi-class misses are weighted by the prior of
    the opposing class renormalized over the non-own classes.
    """
    if cfg is None:
        cfg = ReliefConfig()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    m, d = X.shape
    classes, counts = np.unique(y, return_counts=True)
    if classes.shape[0] < 2:
        raise ValueError("need at least 2 classes")
    if counts.min() < 2:
        raise ValueError("every class needs at least 2 instances")
    priors = {c: cnt / m for c, cnt in zip(classes, counts)}
    Z = _standardize(X) if cfg.standardize else X

    rng = np.random.default_rng(cfg.seed)
    if cfg.iterations <= m:
        picks = rng.permutation(m)[: cfg.iterations]
    else:
        picks = rng.integers(0, m, size=cfg.iterations)

    weights = np.zeros(d)
    order_all = np.arange(m)
    for i in picks:
        diff = Z - Z[i]
        dist = np.einsum("ij,ij->i", diff, diff)
        # stable neighbor order: distance, then index
        nearest = order_all[np.lexsort((order_all, dist))]
        hits = []
        misses: dict = {c: [] for c in classes if c != y[i]}
        for j in nearest:
            if j == i:
                continue
            if y[j] == y[i]:
                if len(hits) < cfg.neighbors:
                    hits.append(j)
            else:
                bucket = misses[y[j]]
                if len(bucket) < cfg.neighbors:
                    bucket.append(j)
        hit_term = np.mean((Z[i] - Z[hits]) ** 2, axis=0)
        miss_term = np.zeros(d)
        own = priors[y[i]]
        for c, bucket in misses.items():
            if bucket:
                miss_term += (priors[c] / (1.0 - own)) * np.mean((Z[i] - Z[bucket]) ** 2, axis=0)
        weights += (miss_term - hit_term) / cfg.iterations

    order = np.lexsort((np.arange(d), -weights))
    return FeatureRanking(weights=weights, order=order)


def forward_selection_curve(X: np.ndarray, y: np.ndarray, ranking: FeatureRanking,
                            evaluator: Callable[[np.ndarray, np.ndarray], float],
                            ns: Sequence[int] = (3, 6, 9, 12, 15, 18, 21),
                            ) -> list[tuple[int, float]]:
    """Accuracy of the evaluator on the top-n ranked features for each n."""
    X = np.asarray(X, dtype=float)
    for n in ns:
        if n < 1 or n > X.shape[1]:
            raise ValueError(f"cannot select {n} features from {X.shape[1]}")
    return [(n, float(evaluator(X[:, ranking.top(n)], y))) for n in ns]


def aggregate_per_phase(weights: np.ndarray, n_phases: int = 3) -> np.ndarray:
    """Mean weight of each per-phase feature across the phase blocks."""
    weights = np.asarray(weights, dtype=float)
    if weights.shape[0] % n_phases:
        raise ValueError("weight vector does not split evenly into phase blocks")
    return weights.reshape(n_phases, -1).mean(axis=0)


def write_ranking_csv(path, ranking: FeatureRanking, feature_ids: Sequence[str]) -> None:
    """CSV with one row per feature: feature_id, weight, rank."""
    if len(feature_ids) != ranking.weights.shape[0]:
        raise ValueError("feature id count does not match ranking size")
    rank_of = np.empty(ranking.order.shape[0], dtype=int)
    rank_of[ranking.order] = np.arange(1, ranking.order.shape[0] + 1)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["feature_id", "weight", "rank"])
        for i, fid in enumerate(feature_ids):
            writer.writerow([fid, f"{ranking.weights[i]:.17g}", rank_of[i]])
