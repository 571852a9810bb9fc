"""Cross-validation, accuracy metrics, and trimmed-fold aggregation."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .dataset import N_CLASSES, LabeledDataset, stratified_split
from .errors import LengthMismatch, TooFewSamples, TooFewValues
from .models.config import ModelConfig
from .models.forest import forest_to_arrays, rf_train
from .models.training import predict_labels, seq_train
from .models.artifacts import ModelArtifact


@dataclass
class FoldMetrics:
    oa: float
    per_class: np.ndarray  # (3,) recalls; 0 where the class has no support
    confusion: np.ndarray  # (3, 3) row-normalized; zero rows where no support
    support: np.ndarray  # (3,) truth counts
    train_seconds: float = 0.0
    predict_seconds: float = 0.0

    def to_dict(self, include_timings: bool = True) -> dict:
        d = {
            "oa": self.oa,
            "per_class": [float(v) for v in self.per_class],
            "confusion": [[float(v) for v in row] for row in self.confusion],
            "support": [int(v) for v in self.support],
        }
        if include_timings:
            d["train_seconds"] = self.train_seconds
            d["predict_seconds"] = self.predict_seconds
        return d


@dataclass
class EvalReport:
    folds: list = field(default_factory=list)
    trimmed_mean_oa: float = 0.0

    def to_dict(self, include_timings: bool = True) -> dict:
        return {
            "folds": [f.to_dict(include_timings=include_timings) for f in self.folds],
            "trimmed_mean_oa": self.trimmed_mean_oa,
        }


def score(predictions, truths) -> FoldMetrics:
    """Overall accuracy, per-class recall, and a row-normalized confusion
    matrix.  Rows with zero support are reported as zeros, never NaN."""
    predictions = np.asarray(predictions, dtype=np.int64)
    truths = np.asarray(truths, dtype=np.int64)
    if predictions.shape != truths.shape or predictions.size == 0:
        raise LengthMismatch(f"{predictions.shape} predictions vs {truths.shape} truths")
    counts = np.zeros((N_CLASSES, N_CLASSES), dtype=np.float64)
    np.add.at(counts, (truths, predictions), 1.0)
    support = counts.sum(axis=1)
    safe = np.where(support > 0, support, 1.0)
    confusion = counts / safe[:, None]
    confusion[support == 0] = 0.0
    per_class = np.where(support > 0, np.diag(counts) / safe, 0.0)
    oa = float(np.trace(counts) / truths.size)
    return FoldMetrics(oa=oa, per_class=per_class, confusion=confusion, support=support.astype(np.int64))


def trimmed_fold_mean(values) -> float:
    """Mean after dropping exactly one minimum and one maximum value."""
    values = [float(v) for v in values]
    if len(values) < 3:
        raise TooFewValues(f"need at least 3 fold values, got {len(values)}")
    ordered = sorted(values)
    return float(np.mean(ordered[1:-1]))


def kfold_split(y, k: int = 10, seed: int = 0) -> np.ndarray:
    """Stratified fold ids: per class, a seeded shuffle then round-robin
    assignment, so per-fold class counts differ by at most one."""
    y = np.asarray(y, dtype=np.int64)
    if y.size < k:
        raise TooFewSamples(f"{y.size} samples cannot fill {k} folds")
    rng = np.random.default_rng(seed)
    folds = np.empty(y.size, dtype=np.int64)
    for c in np.unique(y):
        idx = np.flatnonzero(y == c)
        idx = idx[rng.permutation(idx.size)]
        folds[idx] = np.arange(idx.size) % k
    return folds


def train_once(train: LabeledDataset, val: LabeledDataset, cfg: ModelConfig) -> ModelArtifact:
    """Train either family and wrap it in an artifact."""
    if cfg.kind.is_forest:
        forest = rf_train(train, cfg)
        return ModelArtifact(
            config=cfg.to_dict(),
            arrays=forest_to_arrays(forest),
            fingerprint=train.fingerprint.to_dict(),
            training_log={"n_train": len(train)},
        )
    return seq_train(train, val, cfg)


def evaluate_fold(data: LabeledDataset, folds: np.ndarray, fold: int, cfg: ModelConfig, val_fraction: float = 0.1) -> FoldMetrics:
    """Hold out one fold for testing; carve a stratified validation split out
    of the remaining folds for checkpoint selection."""
    test = data.subset(np.flatnonzero(folds == fold))
    rest = data.subset(np.flatnonzero(folds != fold))
    t0 = time.perf_counter()
    if cfg.kind.is_forest:
        artifact = train_once(rest, rest, cfg)
    else:
        tr, va = stratified_split(rest, (1.0 - val_fraction, val_fraction), seed=cfg.seed + fold)
        artifact = train_once(tr, va, cfg)
    t1 = time.perf_counter()
    preds, _ = predict_labels(artifact, test.X)
    t2 = time.perf_counter()
    metrics = score(preds, test.y)
    metrics.train_seconds = t1 - t0
    metrics.predict_seconds = t2 - t1
    return metrics


def cross_validate(data: LabeledDataset, cfg: ModelConfig, k: int = 10, seed: int = 0, jobs: int = 1) -> EvalReport:
    """K-fold cross-validation; fold results are merged in fold order so the
    report is identical for any worker count."""
    folds = kfold_split(data.y, k=k, seed=seed)
    report = EvalReport()
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(evaluate_fold, data, folds, f, cfg) for f in range(k)]
            report.folds = [fut.result() for fut in futures]
    else:
        report.folds = [evaluate_fold(data, folds, f, cfg) for f in range(k)]
    report.trimmed_mean_oa = trimmed_fold_mean([m.oa for m in report.folds])
    return report


def direct_eval(artifact: ModelArtifact, test: LabeledDataset) -> FoldMetrics:
    artifact.require_fingerprint(test.fingerprint)
    t0 = time.perf_counter()
    preds, _ = predict_labels(artifact, test.X)
    metrics = score(preds, test.y)
    metrics.predict_seconds = time.perf_counter() - t0
    return metrics
