"""Graph-based and confidence-based semi-supervised label inference.

Label spreading diffuses soft labels through a symmetrically normalized
affinity matrix with an alpha-weighted pull back to the seeds; label
propagation hard-clamps the seeds every step; self-training absorbs
pseudo-labels above a confidence threshold round by round. Unlabeled
samples are marked with label -1 throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol

import numpy as np


@dataclass(frozen=True)
class AffinityGraph:
    """Symmetric affinity A and its normalization S = D^-1/2 A D^-1/2."""

    A: np.ndarray
    S: np.ndarray
    kernel: str
    k: int | None
    gamma: float | None
    n_components: int
    isolated: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.A.shape[0]

    @property
    def connected(self) -> bool:
        return self.n_components == 1


@dataclass
class LabelMatrix:
    """Seed labels Y, diffused soft labels F, and convergence diagnostics."""

    Y: np.ndarray
    F: np.ndarray
    labeled_mask: np.ndarray
    classes: np.ndarray
    converged: bool
    n_iter: int
    residual: float

    def hard_labels(self, fill=-1) -> np.ndarray:
        """Argmax labels; rows with no mass (isolated unlabeled nodes) get fill."""
        out = np.full(self.F.shape[0], fill, dtype=self.classes.dtype if
                      np.issubdtype(self.classes.dtype, np.integer) else object)
        mass = self.F.sum(axis=1)
        ok = mass > 0
        out[ok] = self.classes[np.argmax(self.F[ok], axis=1)]
        return out


class ProbabilisticClassifier(Protocol):
    def fit(self, X: np.ndarray, y: np.ndarray) -> "ProbabilisticClassifier": ...
    def predict_proba(self, X: np.ndarray) -> np.ndarray: ...

    @property
    def classes_(self) -> np.ndarray: ...


@dataclass(frozen=True)
class SelfTrainConfig:
    threshold: float = 0.8
    max_rounds: int = 20
    base: "ProbabilisticClassifier | None" = None

    def __post_init__(self) -> None:
        if not 0.5 < self.threshold < 1.0:
            raise ValueError("confidence threshold must lie in (0.5, 1)")
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be >= 1")


def _pairwise_sq_dists(X: np.ndarray) -> np.ndarray:
    sq = np.einsum("ij,ij->i", X, X)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
    np.maximum(d2, 0.0, out=d2)
    return d2


def _n_components(A: np.ndarray) -> tuple[int, np.ndarray]:
    n = A.shape[0]
    seen = np.zeros(n, dtype=bool)
    comps = 0
    adj = A > 0
    for start in range(n):
        if seen[start]:
            continue
        comps += 1
        stack = [start]
        seen[start] = True
        while stack:
            node = stack.pop()
            for nb in np.flatnonzero(adj[node]):
                if not seen[nb]:
                    seen[nb] = True
                    stack.append(nb)
    return comps, seen


def build_affinity(X: np.ndarray, kernel: str = "rbf", *, gamma: float | None = None,
                   k: int | None = None) -> AffinityGraph:
    """Build the similarity graph over feature rows.

    rbf: A_ij = exp(-gamma * ||x_i - x_j||^2) with zero diagonal.
    knn: unweighted k-nearest-neighbor graph symmetrized by union.
    Disconnected graphs are allowed; the component count is reported.
    """
    X = np.asarray(X, dtype=float)
    m = X.shape[0]
    if m < 2:
        raise ValueError("need at least 2 points")
    d2 = _pairwise_sq_dists(X)
    if kernel == "rbf":
        if gamma is None or gamma <= 0:
            raise ValueError("rbf kernel needs gamma > 0")
        A = np.exp(-gamma * d2)
        np.fill_diagonal(A, 0.0)
    elif kernel == "knn":
        if k is None or not 1 <= k < m:
            raise ValueError(f"knn kernel needs 1 <= k < {m}")
        np.fill_diagonal(d2, np.inf)
        order = np.argsort(d2, axis=1, kind="stable")[:, :k]
        A = np.zeros((m, m))
        rows = np.repeat(np.arange(m), k)
        A[rows, order.ravel()] = 1.0
        A = np.maximum(A, A.T)
    else:
        raise ValueError(f"unknown kernel {kernel!r}")
    deg = A.sum(axis=1)
    isolated = deg == 0
    inv_sqrt = np.zeros(m)
    inv_sqrt[~isolated] = 1.0 / np.sqrt(deg[~isolated])
    S = A * inv_sqrt[:, None] * inv_sqrt[None, :]
    comps, _ = _n_components(A)
    return AffinityGraph(A=A, S=S, kernel=kernel, k=k, gamma=gamma,
                         n_components=comps, isolated=isolated)


def _seed_matrix(labels: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    y = np.asarray(labels)
    labeled = y != -1
    classes = np.unique(y[labeled])
    if classes.shape[0] == 0:
        raise ValueError("at least one labeled node is required")
    Y = np.zeros((y.shape[0], classes.shape[0]))
    for j, c in enumerate(classes):
        Y[(y == c), j] = 1.0
    return Y, labeled, classes


def label_spreading(graph: AffinityGraph, labels, alpha: float = 0.2,
                    tol: float = 1e-7, max_iter: int = 1000) -> LabelMatrix:
    """Iterate F <- alpha*S*F + (1-alpha)*Y from F = Y until the sup-norm
    update falls below tol.

    The fixed point matches the closed form (1-alpha)(I - alpha*S)^-1 Y.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    Y, labeled, classes = _seed_matrix(labels)
    F = Y.copy()
    residual = np.inf
    for it in range(1, max_iter + 1):
        F_next = alpha * (graph.S @ F) + (1.0 - alpha) * Y
        residual = float(np.max(np.abs(F_next - F)))
        F = F_next
        if residual < tol:
            return LabelMatrix(Y=Y, F=F, labeled_mask=labeled, classes=classes,
                               converged=True, n_iter=it, residual=residual)
    return LabelMatrix(Y=Y, F=F, labeled_mask=labeled, classes=classes,
                       converged=False, n_iter=max_iter, residual=residual)


def label_spreading_exact(graph: AffinityGraph, labels, alpha: float = 0.2) -> LabelMatrix:
    """Closed-form label spreading via a direct linear solve."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    Y, labeled, classes = _seed_matrix(labels)
    m = Y.shape[0]
    F = (1.0 - alpha) * np.linalg.solve(np.eye(m) - alpha * graph.S, Y)
    return LabelMatrix(Y=Y, F=F, labeled_mask=labeled, classes=classes,
                       converged=True, n_iter=0, residual=0.0)


def label_propagation(graph: AffinityGraph, labels, tol: float = 1e-7,
                      max_iter: int = 1000) -> LabelMatrix:
    """Iterate F <- S*F with labeled rows hard-clamped back to Y each step.

    Labeled rows of the output equal Y exactly. Unlabeled rows are
    renormalized to distributions at the end; rows that received no mass
    (isolated unlabeled nodes) are left at zero.
    """
    Y, labeled, classes = _seed_matrix(labels)
    F = Y.copy()
    residual = np.inf
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        F_next = graph.S @ F
        F_next[labeled] = Y[labeled]
        residual = float(np.max(np.abs(F_next - F)))
        F = F_next
        if residual < tol:
            converged = True
            break
    mass = F.sum(axis=1)
    renorm = ~labeled & (mass > 0)
    F[renorm] = F[renorm] / mass[renorm, None]
    F[labeled] = Y[labeled]
    return LabelMatrix(Y=Y, F=F, labeled_mask=labeled, classes=classes,
                       converged=converged, n_iter=it, residual=residual)


class KNNProbability:
    """k-nearest-neighbor probability estimator, the reference self-training base."""

    def __init__(self, k: int = 5):
        if k < 1:
            raise ValueError("k must be >= 1")
        self.k = k
        self._X: np.ndarray | None = None
        self._y: np.ndarray | None = None
        self.classes_: np.ndarray | None = None

    def fit(self, X: np.ndarray, y: np.ndarray) -> "KNNProbability":
        self._X = np.asarray(X, dtype=float)
        self._y = np.asarray(y)
        self.classes_ = np.unique(self._y)
        return self

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        if self._X is None:
            raise RuntimeError("classifier is not fitted")
        X = np.asarray(X, dtype=float)
        k = min(self.k, self._X.shape[0])
        sq_train = np.einsum("ij,ij->i", self._X, self._X)
        sq_query = np.einsum("ij,ij->i", X, X)
        d2 = sq_query[:, None] + sq_train[None, :] - 2.0 * (X @ self._X.T)
        idx = np.argsort(d2, axis=1, kind="stable")[:, :k]
        probs = np.zeros((X.shape[0], self.classes_.shape[0]))
        for j, c in enumerate(self.classes_):
            probs[:, j] = np.mean(self._y[idx] == c, axis=1)
        return probs


@dataclass
class SelfTrainResult:
    """Pseudo-labels for the unlabeled pool; -1 where never absorbed."""

    pseudo_labels: np.ndarray
    confidence: np.ndarray
    absorbed_round: np.ndarray
    n_rounds: int

    @property
    def absorbed_mask(self) -> np.ndarray:
        return self.absorbed_round >= 0


def self_train(X_labeled: np.ndarray, y_labeled: np.ndarray, X_unlabeled: np.ndarray,
               cfg: SelfTrainConfig | None = None) -> SelfTrainResult:
    """Iterative pseudo-labeling above a confidence threshold.

    Each round refits the base classifier on the grown labeled pool and
    absorbs every remaining unlabeled sample whose top-class probability
    reaches the threshold. Samples are absorbed at most once.
    """
    if cfg is None:
        cfg = SelfTrainConfig()
    base = cfg.base if cfg.base is not None else KNNProbability()
    X_l = np.asarray(X_labeled, dtype=float)
    y_l = np.asarray(y_labeled)
    X_u = np.asarray(X_unlabeled, dtype=float)
    n_u = X_u.shape[0]
    pseudo = np.full(n_u, -1, dtype=int)
    confidence = np.full(n_u, np.nan)
    absorbed_round = np.full(n_u, -1, dtype=int)
    pool_X, pool_y = X_l, y_l
    rounds = 0
    for r in range(cfg.max_rounds):
        remaining = np.flatnonzero(absorbed_round < 0)
        if remaining.shape[0] == 0:
            break
        base.fit(pool_X, pool_y)
        probs = base.predict_proba(X_u[remaining])
        conf = probs.max(axis=1)
        hit = conf >= cfg.threshold
        rounds = r + 1
        if not hit.any():
            break
        taken = remaining[hit]
        labels = base.classes_[np.argmax(probs[hit], axis=1)]
        pseudo[taken] = labels
        confidence[taken] = conf[hit]
        absorbed_round[taken] = r
        pool_X = np.vstack([pool_X, X_u[taken]])
        pool_y = np.concatenate([pool_y, labels])
    return SelfTrainResult(pseudo_labels=pseudo, confidence=confidence,
                           absorbed_round=absorbed_round, n_rounds=rounds)


def fuse_labels(y_true_with_missing, pseudo) -> tuple[np.ndarray, np.ndarray]:
    """Merge pseudo-labels into the gaps (-1 entries) of the true labels.

    Returns (fused labels, kept mask); samples missing from both sides stay
    -1 and are excluded via the mask.
    """
    y = np.asarray(y_true_with_missing)
    p = np.asarray(pseudo)
    if y.shape != p.shape:
        raise ValueError("label arrays must align")
    fused = np.where(y == -1, p, y)
    kept = fused != -1
    return fused, kept
