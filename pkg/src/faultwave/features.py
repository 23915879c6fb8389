"""Quantile-family feature extraction from three-phase current windows.

Per phase, 69 features: 60 change-quantile features (15 corridor pairs x 4
aggregates) followed by 9 plain quantiles. A full record therefore yields
207 features, ordered phase a, b, c.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .synth import PHASES, WaveformRecord

CORRIDOR_HIGHS = (1.0, 0.8, 0.6, 0.4, 0.2)
CORRIDOR_LOWS = (0.8, 0.6, 0.4, 0.2, 0.0)
AGGREGATES = ("mean", "variance", "stddev", "median")
QUANTILE_LEVELS = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)

# The 15 admissible (high, low) corridor pairs, highs outermost, lows
# descending, low < high.
CORRIDOR_PAIRS: tuple[tuple[float, float], ...] = tuple(
    (h, l) for h in CORRIDOR_HIGHS for l in CORRIDOR_LOWS if l < h
)


@dataclass(frozen=True)
class ChangeQuantileSpec:
    """Corridor bounds (as quantile levels) and the aggregate to apply."""

    h: float
    l: float
    aggregate: str = "mean"

    def __post_init__(self) -> None:
        if not 0.0 < self.h <= 1.0:
            raise ValueError(f"corridor high {self.h} must lie in (0, 1]")
        if not 0.0 <= self.l < 1.0:
            raise ValueError(f"corridor low {self.l} must lie in [0, 1)")
        if self.l >= self.h:
            raise ValueError(f"corridor low {self.l} must be below high {self.h}")
        if self.aggregate not in AGGREGATES:
            raise ValueError(f"unknown aggregate {self.aggregate!r}")


@dataclass(frozen=True)
class FeatureVector:
    """Feature values with their parallel stable identifiers."""

    values: np.ndarray
    feature_ids: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(self.values) != len(self.feature_ids):
            raise ValueError("values and feature_ids lengths differ")
        if len(set(self.feature_ids)) != len(self.feature_ids):
            raise ValueError("feature_ids must be unique")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("feature values must be finite")

    def __len__(self) -> int:
        return len(self.values)


def corridor_changes(signal: np.ndarray, h: float, l: float) -> np.ndarray:
    """Absolute consecutive changes restricted to the [l, h] quantile corridor.

    A pair (x[t], x[t+1]) qualifies only when both samples lie inside the
    closed corridor.
    """
    x = np.asarray(signal, dtype=float)
    if x.ndim != 1 or x.shape[0] < 2:
        raise ValueError("signal must be 1-D with at least 2 samples")
    lo = np.quantile(x, l)
    hi = np.quantile(x, h)
    inside = (x >= lo) & (x <= hi)
    keep = inside[:-1] & inside[1:]
    return np.abs(np.diff(x))[keep]


def change_quantile(signal: np.ndarray, spec: ChangeQuantileSpec) -> float:
    """Aggregate of absolute consecutive changes inside a quantile corridor.

    Returns 0 when no consecutive pair falls fully inside the corridor.
    """
    changes = corridor_changes(signal, spec.h, spec.l)
    if changes.size == 0:
        return 0.0
    if spec.aggregate == "mean":
        return float(np.mean(changes))
    if spec.aggregate == "variance":
        return float(np.var(changes))
    if spec.aggregate == "stddev":
        return float(np.std(changes))
    return float(np.median(changes))


def quantile_feature(signal: np.ndarray, p: float) -> float:
    """Empirical p-quantile with linear interpolation between order statistics."""
    x = np.asarray(signal, dtype=float)
    if x.size == 0:
        raise ValueError("signal must be nonempty")
    if not 0.0 < p < 1.0:
        raise ValueError(f"quantile level {p} must lie in (0, 1)")
    return float(np.quantile(x, p))


def phase_feature_ids() -> tuple[str, ...]:
    """The 69 per-phase feature identifiers in extraction order."""
    ids = [
        f"cq_h{int(round(h * 100)):03d}_l{int(round(l * 100)):03d}_{agg}"
        for (h, l) in CORRIDOR_PAIRS
        for agg in AGGREGATES
    ]
    ids += [f"q{int(round(p * 100)):02d}" for p in QUANTILE_LEVELS]
    return tuple(ids)


def record_feature_ids() -> tuple[str, ...]:
    """The 207 per-record identifiers: per-phase ids prefixed ia_/ib_/ic_."""
    per_phase = phase_feature_ids()
    return tuple(f"i{ph}_{fid}" for ph in PHASES for fid in per_phase)


def corridor_of(feature_id: str) -> tuple[float, float] | None:
    """(h, l) corridor of a change-quantile feature id, None for plain quantiles."""
    fid = feature_id.split("_", 1)[1] if feature_id.startswith(("ia_", "ib_", "ic_")) else feature_id
    if not fid.startswith("cq_"):
        return None
    parts = fid.split("_")
    return int(parts[1][1:]) / 100.0, int(parts[2][1:]) / 100.0


def aggregate_of(feature_id: str) -> str | None:
    """Aggregate name of a change-quantile feature id, None for plain quantiles."""
    fid = feature_id.split("_", 1)[1] if feature_id.startswith(("ia_", "ib_", "ic_")) else feature_id
    if not fid.startswith("cq_"):
        return None
    return fid.rsplit("_", 1)[1]


def extract_phase_features(signal: np.ndarray) -> np.ndarray:
    """All 69 quantile-family features of one phase signal."""
    x = np.asarray(signal, dtype=float)
    values = np.empty(len(CORRIDOR_PAIRS) * len(AGGREGATES) + len(QUANTILE_LEVELS))
    pos = 0
    for h, l in CORRIDOR_PAIRS:
        changes = corridor_changes(x, h, l)
        if changes.size == 0:
            values[pos : pos + 4] = 0.0
        else:
            values[pos] = np.mean(changes)
            values[pos + 1] = np.var(changes)
            values[pos + 2] = np.std(changes)
            values[pos + 3] = np.median(changes)
        pos += 4
    for p in QUANTILE_LEVELS:
        values[pos] = np.quantile(x, p)
        pos += 1
    return values


def extract_all(rec: WaveformRecord) -> FeatureVector:
    """The full 207-element feature vector of a record, phases a, b, c."""
    values = np.concatenate([extract_phase_features(rec.samples[i]) for i in range(3)])
    return FeatureVector(values=values, feature_ids=record_feature_ids())


def extract_selected(rec: WaveformRecord, selection: Sequence[str]) -> FeatureVector:
    """Apply the same 5 per-phase feature ids to each phase, concatenated a, b, c."""
    selection = list(selection)
    if len(selection) != 5:
        raise ValueError(f"selection must contain 5 per-phase ids, got {len(selection)}")
    if len(set(selection)) != len(selection):
        raise ValueError("selection contains duplicate feature ids")
    per_phase = phase_feature_ids()
    index = {fid: i for i, fid in enumerate(per_phase)}
    try:
        cols = [index[fid] for fid in selection]
    except KeyError as exc:
        raise ValueError(f"unknown feature id {exc.args[0]!r}") from None
    values = []
    ids = []
    for p, _ in enumerate(PHASES):
        phase_vals = extract_phase_features(rec.samples[p])
        values.append(phase_vals[cols])
        ids.extend(f"i{PHASES[p]}_{fid}" for fid in selection)
    return FeatureVector(values=np.concatenate(values), feature_ids=tuple(ids))


def write_feature_table(path, rows: Iterable[tuple[str, WaveformRecord, FeatureVector]]) -> None:
    """Write a feature CSV: record_id, label, phase_label, location_label, f_<id>...

    All rows must share one feature-id layout.
    """
    rows = list(rows)
    if not rows:
        raise ValueError("no rows to write")
    ids = rows[0][2].feature_ids
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["record_id", "label", "phase_label", "location_label"] + [f"f_{fid}" for fid in ids])
        for record_id, rec, fv in rows:
            if fv.feature_ids != ids:
                raise ValueError("inconsistent feature ids across rows")
            writer.writerow(
                [record_id, rec.label, "".join(sorted(rec.phase_label)), rec.location_label or ""]
                + [f"{v:.17g}" for v in fv.values]
            )


def read_feature_table(path) -> tuple[list[str], list[str], list[str], list[str], np.ndarray, tuple[str, ...]]:
    """Read a feature CSV back: ids, labels, phase labels, locations, X, feature ids."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        feature_ids = tuple(h[2:] for h in header[4:])
        record_ids, labels, phase_labels, locations, data = [], [], [], [], []
        for row in reader:
            record_ids.append(row[0])
            labels.append(row[1])
            phase_labels.append(row[2])
            locations.append(row[3])
            data.append([float(v) for v in row[4:]])
    return record_ids, labels, phase_labels, locations, np.array(data), feature_ids
