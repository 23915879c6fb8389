"""Time-series imaging: recurrence matrices, GASF, and Markov transition fields.

The recurrence matrix here is real-valued (actual Euclidean distances
between delay-embedded states), not a thresholded binary plot.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

IMAGE_KINDS = ("rp", "gasf", "mtf")
_KIND_CODES = {"rp": 0, "gasf": 1, "mtf": 2}
_CODE_KINDS = {v: k for k, v in _KIND_CODES.items()}
_MAGIC = b"FWIM1\x00"


@dataclass(frozen=True)
class RecurrenceSpec:
    """Delay-embedding parameters: dimension and lag."""

    embedding_dim: int = 1
    delay: int = 1

    def __post_init__(self) -> None:
        if self.embedding_dim < 1:
            raise ValueError("embedding dimension must be >= 1")
        if self.delay < 1:
            raise ValueError("delay must be >= 1")


@dataclass(frozen=True)
class ImageTensor:
    """Square image produced by one of the three transforms."""

    data: np.ndarray
    kind: str
    source_len: int

    def __post_init__(self) -> None:
        if self.kind not in IMAGE_KINDS:
            raise ValueError(f"unknown image kind {self.kind!r}")
        if self.data.ndim != 2 or self.data.shape[0] != self.data.shape[1]:
            raise ValueError("image must be a square matrix")
        if self.data.shape[0] != self.source_len:
            raise ValueError("source_len must equal the matrix dimension")

    @property
    def n(self) -> int:
        return self.data.shape[0]


def recurrence_matrix(series: np.ndarray, spec: RecurrenceSpec | None = None) -> ImageTensor:
    """Pairwise Euclidean distances between delay-embedded states.

    With embedding_dim 1 this is simply |x_p - x_q|.
    """
    if spec is None:
        spec = RecurrenceSpec()
    x = np.asarray(series, dtype=float).ravel()
    m = x.shape[0] - (spec.embedding_dim - 1) * spec.delay
    if m < 2:
        raise ValueError(
            f"series of length {x.shape[0]} too short for embedding dim "
            f"{spec.embedding_dim} with delay {spec.delay}")
    idx = np.arange(m)[:, None] + spec.delay * np.arange(spec.embedding_dim)[None, :]
    vectors = x[idx]
    diff = vectors[:, None, :] - vectors[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=2))
    return ImageTensor(data=dist, kind="rp", source_len=m)


def gasf(series: np.ndarray) -> ImageTensor:
    """Gramian angular summation field of a min-max rescaled series.

    A constant series rescales to all zeros (angle pi/2) so the transform
    stays total.
    """
    x = np.asarray(series, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("series must be nonempty")
    lo, hi = x.min(), x.max()
    if hi > lo:
        scaled = 2.0 * (x - lo) / (hi - lo) - 1.0
    else:
        scaled = np.zeros_like(x)
    alpha = np.arccos(np.clip(scaled, -1.0, 1.0))
    g = np.cos(alpha[:, None] + alpha[None, :])
    return ImageTensor(data=g, kind="gasf", source_len=x.shape[0])


def mtf(series: np.ndarray, n_bins: int = 4) -> ImageTensor:
    """Markov transition field over quantile bins.

    Empty bins (fewer distinct values than bins) are merged away; bins with
    no outgoing transition get a uniform row in the transition matrix.
    """
    x = np.asarray(series, dtype=float).ravel()
    if x.shape[0] < 2:
        raise ValueError("series must have at least 2 samples")
    if n_bins < 2:
        raise ValueError("n_bins must be >= 2")
    edges = np.quantile(x, np.arange(1, n_bins) / n_bins)
    bins = np.searchsorted(edges, x, side="right")
    occupied, bins = np.unique(bins, return_inverse=True)
    k = occupied.shape[0]
    counts = np.zeros((k, k))
    np.add.at(counts, (bins[:-1], bins[1:]), 1.0)
    totals = counts.sum(axis=1, keepdims=True)
    w = np.where(totals > 0, counts / np.where(totals == 0, 1.0, totals), 1.0 / k)
    field = w[bins[:, None], bins[None, :]]
    return ImageTensor(data=field, kind="mtf", source_len=x.shape[0])


def transform(series: np.ndarray, kind: str, n_bins: int = 4,
              spec: RecurrenceSpec | None = None) -> ImageTensor:
    """Dispatch to one of the three imaging transforms by name."""
    if kind == "rp":
        return recurrence_matrix(series, spec)
    if kind == "gasf":
        return gasf(series)
    if kind == "mtf":
        return mtf(series, n_bins)
    raise ValueError(f"unknown image kind {kind!r}")


def write_image_csv(path, image: ImageTensor) -> None:
    """Dump one image as an N x N CSV for inspection."""
    np.savetxt(path, image.data, delimiter=",", fmt="%.17g")


def write_image_dataset(path, images: list[ImageTensor]) -> None:
    """Binary image set: magic, kind code, N, count, then row-major doubles."""
    if not images:
        raise ValueError("no images to write")
    kind = images[0].kind
    n = images[0].n
    for img in images:
        if img.kind != kind or img.n != n:
            raise ValueError("all images must share kind and size")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<BII", _KIND_CODES[kind], n, len(images)))
        for img in images:
            fh.write(np.ascontiguousarray(img.data, dtype="<f8").tobytes())


def read_image_dataset(path) -> list[ImageTensor]:
    """Read a binary image set written by write_image_dataset."""
    with open(path, "rb") as fh:
        magic = fh.read(len(_MAGIC))
        if magic != _MAGIC:
            raise ValueError("not an image dataset file")
        code, n, count = struct.unpack("<BII", fh.read(9))
        kind = _CODE_KINDS[code]
        images = []
        for _ in range(count):
            buf = fh.read(8 * n * n)
            data = np.frombuffer(buf, dtype="<f8").reshape(n, n).copy()
            images.append(ImageTensor(data=data, kind=kind, source_len=n))
    return images
