"""Measurement layer: stratified splits, SMOTE balancing, classification metrics."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np


def split_indices(labels, ratio: float = 0.7, stratified: bool = True,
                  seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Disjoint, exhaustive train/test index split.

    Stratified mode allocates per-class train counts by largest remainder so
    the global split hits round(ratio*n) exactly while class proportions stay
    within one sample of the ratio.
    """
    y = np.asarray(labels)
    n = y.shape[0]
    if not 0.0 < ratio < 1.0:
        raise ValueError("ratio must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    n_train = int(np.floor(ratio * n + 0.5))
    if not stratified:
        perm = rng.permutation(n)
        return np.sort(perm[:n_train]), np.sort(perm[n_train:])

    classes, counts = np.unique(y, return_counts=True)
    if counts.min() < 2:
        raise ValueError("stratified split needs at least 2 members per class")
    quotas = ratio * counts
    base = np.floor(quotas).astype(int)
    remainder = n_train - base.sum()
    if remainder > 0:
        frac = quotas - base
        extra = np.lexsort((np.arange(classes.shape[0]), -frac))[:remainder]
        base[extra] += 1
    train_parts, test_parts = [], []
    for c, take in zip(classes, base):
        idx = np.flatnonzero(y == c)
        idx = idx[rng.permutation(idx.shape[0])]
        train_parts.append(idx[:take])
        test_parts.append(idx[take:])
    return np.sort(np.concatenate(train_parts)), np.sort(np.concatenate(test_parts))


def split(items, labels, ratio: float = 0.7, stratified: bool = True, seed: int = 0):
    """Split a sequence of items with aligned labels; returns two (items, labels) pairs."""
    tr, te = split_indices(labels, ratio, stratified, seed)
    y = np.asarray(labels)
    pick = lambda idx: [items[i] for i in idx]
    return (pick(tr), y[tr]), (pick(te), y[te])


@dataclass(frozen=True)
class SmoteResult:
    """Balanced data plus the parentage of every synthetic row."""

    X: np.ndarray
    y: np.ndarray
    parents: tuple[tuple[int, int, float], ...]

    @property
    def n_synthetic(self) -> int:
        return len(self.parents)


def smote(X, y, k: int = 5, seed: int = 0) -> SmoteResult:
    """Oversample every minority class up to the majority count.

    Each synthetic point is x_i + u * (x_nn - x_i) with u uniform in [0, 1)
    and x_nn one of the k nearest same-class neighbors of x_i. Original rows
    are passed through untouched, synthetic rows appended.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    classes, counts = np.unique(y, return_counts=True)
    target = counts.max()
    rng = np.random.default_rng(seed)
    new_rows, new_labels, parents = [], [], []
    for c, cnt in zip(classes, counts):
        need = target - cnt
        if need == 0:
            continue
        if cnt < k + 1:
            raise ValueError(f"class {c!r} has {cnt} members, needs at least {k + 1} for k={k}")
        idx = np.flatnonzero(y == c)
        pts = X[idx]
        diff = pts[:, None, :] - pts[None, :, :]
        dist = np.einsum("ijk,ijk->ij", diff, diff)
        np.fill_diagonal(dist, np.inf)
        nn = np.argsort(dist, axis=1, kind="stable")[:, :k]
        for _ in range(need):
            a = rng.integers(0, cnt)
            b = nn[a, rng.integers(0, k)]
            u = rng.uniform()
            new_rows.append(pts[a] + u * (pts[b] - pts[a]))
            new_labels.append(c)
            parents.append((int(idx[a]), int(idx[b]), float(u)))
    if new_rows:
        X_out = np.vstack([X, np.array(new_rows)])
        y_out = np.concatenate([y, np.array(new_labels, dtype=y.dtype)])
    else:
        X_out, y_out = X.copy(), y.copy()
    return SmoteResult(X=X_out, y=y_out, parents=tuple(parents))


@dataclass
class MetricsReport:
    accuracy: float
    precision: dict
    recall: dict
    f1: dict
    macro_precision: float
    macro_recall: float
    macro_f1: float
    auroc: float | None
    auprc: float | None
    confusion: np.ndarray
    classes: tuple = field(default_factory=tuple)

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "precision": {str(k): v for k, v in self.precision.items()},
            "recall": {str(k): v for k, v in self.recall.items()},
            "f1": {str(k): v for k, v in self.f1.items()},
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "macro_f1": self.macro_f1,
            "auroc": self.auroc,
            "auprc": self.auprc,
            "classes": [str(c) for c in self.classes],
            "confusion": self.confusion.astype(int).tolist(),
        }


def confusion_matrix(y_true, y_pred, classes) -> np.ndarray:
    index = {c: i for i, c in enumerate(classes)}
    cm = np.zeros((len(classes), len(classes)))
    for t, p in zip(y_true, y_pred):
        cm[index[t], index[p]] += 1
    return cm


def roc_auc(y_true_binary: np.ndarray, scores: np.ndarray) -> float:
    """AUROC by trapezoidal integration of the ROC curve over all thresholds."""
    y = np.asarray(y_true_binary, dtype=bool)
    s = np.asarray(scores, dtype=float)
    n_pos = int(y.sum())
    n_neg = y.shape[0] - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUROC needs both classes present")
    order = np.argsort(-s, kind="stable")
    y_sorted = y[order]
    s_sorted = s[order]
    tps = np.cumsum(y_sorted)
    fps = np.cumsum(~y_sorted)
    distinct = np.flatnonzero(np.diff(s_sorted) != 0)
    cut = np.concatenate([distinct, [y.shape[0] - 1]])
    tpr = np.concatenate([[0.0], tps[cut] / n_pos])
    fpr = np.concatenate([[0.0], fps[cut] / n_neg])
    return float(np.trapezoid(tpr, fpr))


def pr_auc(y_true_binary: np.ndarray, scores: np.ndarray) -> float:
    """Area under the precision-recall curve by step integration."""
    y = np.asarray(y_true_binary, dtype=bool)
    s = np.asarray(scores, dtype=float)
    n_pos = int(y.sum())
    if n_pos == 0:
        raise ValueError("AUPRC needs positive samples")
    order = np.argsort(-s, kind="stable")
    y_sorted = y[order]
    s_sorted = s[order]
    tps = np.cumsum(y_sorted)
    fps = np.cumsum(~y_sorted)
    distinct = np.flatnonzero(np.diff(s_sorted) != 0)
    cut = np.concatenate([distinct, [y.shape[0] - 1]])
    recall = tps[cut] / n_pos
    precision = tps[cut] / (tps[cut] + fps[cut])
    prev_r = 0.0
    area = 0.0
    for r, p in zip(recall, precision):
        area += (r - prev_r) * p
        prev_r = r
    return float(area)


def metrics(y_true, y_pred, scores: np.ndarray | None = None, classes=None) -> MetricsReport:
    """Classification metrics with a fixed-order confusion matrix.

    scores: per-sample score of the positive class (binary) or an (m, C)
    probability matrix (multi-class, one-vs-rest macro AUROC/AUPRC). With a
    single-class y_true the ranking metrics are reported as None.
    """
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.shape[0] != y_pred.shape[0]:
        raise ValueError("y_true and y_pred lengths differ")
    if classes is None:
        classes = tuple(sorted(set(y_true.tolist()) | set(y_pred.tolist())))
    else:
        classes = tuple(classes)
    cm = confusion_matrix(y_true, y_pred, classes)
    total = cm.sum()
    accuracy = float(np.trace(cm) / total)
    precision, recall, f1 = {}, {}, {}
    for i, c in enumerate(classes):
        col = cm[:, i].sum()
        row = cm[i, :].sum()
        p = cm[i, i] / col if col > 0 else 0.0
        r = cm[i, i] / row if row > 0 else 0.0
        precision[c] = float(p)
        recall[c] = float(r)
        f1[c] = float(2 * p * r / (p + r)) if p + r > 0 else 0.0

    auroc = auprc = None
    if scores is not None and len(set(y_true.tolist())) >= 2:
        scores = np.asarray(scores, dtype=float)
        if scores.ndim == 1:
            positive = classes[1] if len(classes) == 2 else classes[-1]
            auroc = roc_auc(y_true == positive, scores)
            auprc = pr_auc(y_true == positive, scores)
        else:
            aucs, prcs = [], []
            for i, c in enumerate(classes):
                mask = y_true == c
                if 0 < mask.sum() < y_true.shape[0]:
                    aucs.append(roc_auc(mask, scores[:, i]))
                    prcs.append(pr_auc(mask, scores[:, i]))
            auroc = float(np.mean(aucs)) if aucs else None
            auprc = float(np.mean(prcs)) if prcs else None

    return MetricsReport(
        accuracy=accuracy, precision=precision, recall=recall, f1=f1,
        macro_precision=float(np.mean(list(precision.values()))),
        macro_recall=float(np.mean(list(recall.values()))),
        macro_f1=float(np.mean(list(f1.values()))),
        auroc=auroc, auprc=auprc, confusion=cm, classes=classes)


def write_metrics_json(path, report: MetricsReport) -> None:
    with open(path, "w") as fh:
        json.dump(report.to_dict(), fh, indent=1, sort_keys=True)


def write_confusion_csv(path, report: MetricsReport) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["true\\pred"] + [str(c) for c in report.classes])
        for i, c in enumerate(report.classes):
            writer.writerow([str(c)] + [int(v) for v in report.confusion[i]])
