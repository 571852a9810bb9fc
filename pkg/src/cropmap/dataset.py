"""Labeled tensor datasets built from regularized series.

Models consume dense (n, steps, channels) float64 arrays; this module owns the
conversion from RegularSeries lists, the preprocessing fingerprint that guards
train/predict compatibility, split handling, and channel-wise normalization
statistics.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, FingerprintMismatch, ShapeMismatch, TooFewSamples
from .reconstruct import RegularSeries
from .series import ClassLabel

N_CLASSES = 3


@dataclass(frozen=True)
class Fingerprint:
    """Identity of a preprocessing pipeline: method, grid, and channel set.

    Artifacts refuse inputs whose fingerprint differs from the one they were
    trained with.
    """

    method: str
    start_doy: int
    interval_days: int
    steps: int
    channel_names: tuple

    @classmethod
    def of_series(cls, rs: RegularSeries) -> "Fingerprint":
        if rs.grid is not None:
            start = rs.grid.start_doy
            interval = rs.grid.interval_days
        else:
            start = int(rs.doys[0])
            diffs = np.diff(rs.doys)
            interval = int(diffs[0]) if diffs.size and np.all(diffs == diffs[0]) else 0
        if rs.method.value == "pheno_peak":
            # window start varies per pixel; only interval and width identify it
            start = 0
        elif rs.method.value in ("raw", "weighted_we"):
            # native acquisition dates differ per pixel
            start = 0
            interval = 0
        return cls(
            method=rs.method.value,
            start_doy=start,
            interval_days=interval,
            steps=rs.steps,
            channel_names=tuple(rs.channel_names),
        )

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "start_doy": self.start_doy,
            "interval_days": self.interval_days,
            "steps": self.steps,
            "channel_names": list(self.channel_names),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Fingerprint":
        return cls(
            method=str(d["method"]),
            start_doy=int(d["start_doy"]),
            interval_days=int(d["interval_days"]),
            steps=int(d["steps"]),
            channel_names=tuple(d["channel_names"]),
        )

    def require_match(self, other: "Fingerprint"):
        if self != other:
            raise FingerprintMismatch(f"expected {self}, got {other}")


@dataclass
class NormStats:
    """Channel-wise z-score parameters, fitted on the training split only."""

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "NormStats":
        mean = X.mean(axis=(0, 1))
        std = X.std(axis=(0, 1))
        std = np.where(std < 1e-8, 1.0, std)
        return cls(mean=mean, std=std)

    def apply(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mean) / self.std


@dataclass
class LabeledDataset:
    """Dense feature tensor (n, steps, channels) with integer class labels."""

    X: np.ndarray
    y: np.ndarray
    fingerprint: Fingerprint
    pixel_ids: tuple = ()

    def __post_init__(self):
        self.X = np.ascontiguousarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.X.ndim != 3:
            raise ShapeMismatch(f"X must be (n, steps, channels), got {self.X.shape}")
        if self.y.shape != (self.X.shape[0],):
            raise ShapeMismatch(f"y shape {self.y.shape} vs n={self.X.shape[0]}")
        if self.pixel_ids and len(self.pixel_ids) != self.X.shape[0]:
            raise ShapeMismatch("pixel_ids length mismatch")

    def __len__(self):
        return self.X.shape[0]

    @classmethod
    def from_series(cls, series_list, labels) -> "LabeledDataset":
        if not series_list:
            raise DataError("empty series list")
        fp = Fingerprint.of_series(series_list[0])
        for rs in series_list[1:]:
            fp.require_match(Fingerprint.of_series(rs))
        X = np.stack([rs.channels for rs in series_list])
        y = np.array([int(label) for label in labels], dtype=np.int64)
        ids = tuple(rs.pixel_id for rs in series_list)
        return cls(X=X, y=y, fingerprint=fp, pixel_ids=ids)

    def subset(self, indices) -> "LabeledDataset":
        indices = np.asarray(indices, dtype=np.int64)
        ids = tuple(self.pixel_ids[i] for i in indices) if self.pixel_ids else ()
        return LabeledDataset(X=self.X[indices], y=self.y[indices], fingerprint=self.fingerprint, pixel_ids=ids)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.y, minlength=N_CLASSES)


@dataclass
class Splits:
    train: LabeledDataset
    val: LabeledDataset
    test: LabeledDataset | None = None


def stratified_split(data: LabeledDataset, fractions, seed: int) -> list:
    """Split into len(fractions) disjoint stratified parts.

    Per class, items are shuffled once and sliced by cumulative fraction
    (largest-remainder rounding keeps totals exact).  fractions must sum to 1.
    """
    fractions = np.asarray(fractions, dtype=np.float64)
    if abs(fractions.sum() - 1.0) > 1e-9:
        raise DataError(f"fractions sum to {fractions.sum()}, expected 1")
    rng = np.random.default_rng(seed)
    parts: list[list] = [[] for _ in fractions]
    for c in np.unique(data.y):
        idx = np.flatnonzero(data.y == c)
        idx = idx[rng.permutation(idx.size)]
        n = idx.size
        raw = fractions * n
        counts = np.floor(raw).astype(np.int64)
        rem = n - counts.sum()
        order = np.argsort(-(raw - counts), kind="stable")
        for j in order[:rem]:
            counts[j] += 1
        start = 0
        for j, cnt in enumerate(counts):
            parts[j].append(idx[start : start + cnt])
            start += cnt
    out = []
    for chunks in parts:
        merged = np.sort(np.concatenate(chunks)) if chunks else np.empty(0, dtype=np.int64)
        out.append(data.subset(merged))
    return out


def train_val_test(data: LabeledDataset, seed: int, fractions=(0.8, 0.1, 0.1)) -> Splits:
    if len(data) < 3:
        raise TooFewSamples(f"need at least 3 samples, got {len(data)}")
    tr, va, te = stratified_split(data, fractions, seed)
    return Splits(train=tr, val=va, test=te)
