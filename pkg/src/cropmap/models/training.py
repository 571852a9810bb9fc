"""Minibatch training with per-epoch validation and min-val-loss checkpointing."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import autodiff as ad
from ..dataset import N_CLASSES, LabeledDataset, NormStats
from ..errors import EmptyTrainSet, NonFiniteLoss
from .artifacts import ModelArtifact
from .config import ModelConfig
from .nets import SequenceModel


@dataclass
class TrainLog:
    """Per-epoch record; floats only, so it serializes reproducibly."""

    epochs: list = field(default_factory=list)
    best_epoch: int = -1
    best_val_loss: float = float("inf")

    def to_dict(self) -> dict:
        return {"epochs": self.epochs, "best_epoch": self.best_epoch, "best_val_loss": self.best_val_loss}


def _batch_loss(model: SequenceModel, X, y, class_weights, train: bool, rng):
    logits = model.forward(X, train=train, rng=rng)
    return ad.cross_entropy(logits, y, class_weights=class_weights)


def _eval_loss(model: SequenceModel, X, y, class_weights, batch_size: int) -> float:
    total = 0.0
    weight = 0.0
    for start in range(0, X.shape[0], batch_size):
        xb = X[start : start + batch_size]
        yb = y[start : start + batch_size]
        loss = _batch_loss(model, xb, yb, class_weights, train=False, rng=None)
        if class_weights is None:
            w = xb.shape[0]
        else:
            w = float(np.asarray(class_weights)[yb].sum())
        total += float(loss.data) * w
        weight += w
    return total / max(weight, 1e-12)


def train_loop(
    model: SequenceModel,
    X_train: np.ndarray,
    y_train: np.ndarray,
    X_val: np.ndarray,
    y_val: np.ndarray,
    *,
    lr: float,
    batch_size: int,
    epochs: int,
    rng: np.random.Generator,
    class_weights=None,
    weighted_sampler: bool = False,
    trainable: set | None = None,
    scheduler_patience: int = 3,
    scheduler_factor: float = 0.5,
) -> TrainLog:
    """Runs Adam over (a subset of) the model's parameters and restores the
    minimum-validation-loss checkpoint before returning.

    weighted_sampler draws each epoch's indices with replacement with
    probability proportional to the sample's class weight.
    """
    if X_train.shape[0] == 0:
        raise EmptyTrainSet("no training samples")
    params = model.params if trainable is None else {k: v for k, v in model.params.items() if k in trainable}
    opt = ad.Adam(params, lr=lr)
    sched = ad.HalveOnPlateau(opt, patience=scheduler_patience, factor=scheduler_factor)
    log = TrainLog()
    best: dict | None = None
    n = X_train.shape[0]
    sample_p = None
    if weighted_sampler:
        if class_weights is None:
            raise ValueError("weighted_sampler needs class_weights")
        w = np.asarray(class_weights, dtype=np.float64)[y_train]
        sample_p = w / w.sum()
    for epoch in range(epochs):
        if weighted_sampler:
            order = rng.choice(n, size=n, replace=True, p=sample_p)
        else:
            order = rng.permutation(n)
        epoch_loss = 0.0
        n_batches = 0
        for start in range(0, n, batch_size):
            idx = order[start : start + batch_size]
            opt.zero_grad()
            loss = _batch_loss(model, X_train[idx], y_train[idx], class_weights, train=True, rng=rng)
            value = float(loss.data)
            if not np.isfinite(value):
                raise NonFiniteLoss(f"training loss diverged at epoch {epoch}")
            loss.backward()
            opt.step()
            epoch_loss += value
            n_batches += 1
        val_loss = _eval_loss(model, X_val, y_val, class_weights, batch_size)
        if not np.isfinite(val_loss):
            raise NonFiniteLoss(f"validation loss diverged at epoch {epoch}")
        log.epochs.append(
            {
                "epoch": epoch,
                "train_loss": epoch_loss / max(n_batches, 1),
                "val_loss": val_loss,
                "lr": opt.lr,
            }
        )
        if val_loss < log.best_val_loss:
            log.best_val_loss = val_loss
            log.best_epoch = epoch
            best = model.param_arrays()
        sched.step(val_loss)
    if best is not None:
        model.load_param_arrays(best)
    return log


def seq_train(train: LabeledDataset, val: LabeledDataset, cfg: ModelConfig) -> ModelArtifact:
    """Supervised training of one sequence model.

    Z-score stats are fitted on the train split only and stored in the
    artifact; inputs at predict time are normalized with the stored stats.
    """
    if len(train) == 0:
        raise EmptyTrainSet("empty train split")
    stats = NormStats.fit(train.X)
    rng = np.random.default_rng(cfg.seed)
    model = SequenceModel(cfg, n_channels=train.X.shape[2], steps=train.X.shape[1], rng=rng)
    log = train_loop(
        model,
        stats.apply(train.X),
        train.y,
        stats.apply(val.X),
        val.y,
        lr=cfg.lr,
        batch_size=cfg.batch_size,
        epochs=cfg.epochs,
        rng=rng,
    )
    return ModelArtifact(
        config=cfg.to_dict(),
        arrays=model.param_arrays(),
        norm_mean=stats.mean.copy(),
        norm_std=stats.std.copy(),
        fingerprint=train.fingerprint.to_dict(),
        training_log=log.to_dict(),
    )


def softmax_probs(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def predict_labels(artifact: ModelArtifact, X: np.ndarray, batch_size: int = 4096):
    """Labels and confidences for raw (unnormalized) feature tensors."""
    from .forest import forest_from_arrays, rf_predict

    if artifact.kind.is_forest:
        forest = forest_from_arrays(artifact.arrays)
        return rf_predict(forest, X, return_confidence=True)
    model = artifact.build_model(X.shape[1], X.shape[2])
    Xn = artifact.normalize(X)
    labels = np.empty(X.shape[0], dtype=np.int64)
    conf = np.empty(X.shape[0], dtype=np.float64)
    for start in range(0, X.shape[0], batch_size):
        logits = model.forward(Xn[start : start + batch_size]).data
        probs = softmax_probs(logits)
        labels[start : start + batch_size] = np.argmax(probs, axis=1)
        conf[start : start + batch_size] = probs.max(axis=1)
    return labels, conf
