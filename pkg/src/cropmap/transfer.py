"""Cross-site transfer workflows: direct evaluation, fine-tuning regimes
R1-R4, domain-adversarial training, and multi-source composition.

The DomainPair type enforces the no-target-label rule structurally: the
adaptation side of a pair exposes only the feature tensor, so an adversarial
run cannot read target labels even by accident.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .dataset import N_CLASSES, Fingerprint, LabeledDataset, NormStats
from .errors import (
    DataError,
    EmptyClass,
    FingerprintMismatch,
    InsufficientSamples,
    NonFiniteLoss,
    UnsupportedModelKind,
)
from .evaluate import FoldMetrics, direct_eval
from .models.artifacts import ModelArtifact
from .models.config import ModelConfig
from .models.nets import HEAD_PREFIX, SequenceModel
from .models.training import train_loop

FINETUNE_STRATEGIES = ("R1", "R2", "R3", "R4")


@dataclass(frozen=True)
class DomainPair:
    """Source dataset plus a target whose labels are reachable only through
    the evaluation split."""

    source: LabeledDataset
    target_adapt_X: np.ndarray  # unlabeled adaptation pool, (n, steps, channels)
    target_test: LabeledDataset

    def __post_init__(self):
        fp = self.source.fingerprint
        fp.require_match(self.target_test.fingerprint)
        if self.target_adapt_X.shape[1:] != self.source.X.shape[1:]:
            raise FingerprintMismatch(
                f"adaptation pool shape {self.target_adapt_X.shape[1:]} vs source {self.source.X.shape[1:]}"
            )


@dataclass(frozen=True)
class FinetuneStrategy:
    name: str
    epochs: int = 40
    lr: float = 1e-5
    batch_size: int = 32

    def __post_init__(self):
        if self.name not in FINETUNE_STRATEGIES:
            raise DataError(f"unknown strategy {self.name!r}; choose from {FINETUNE_STRATEGIES}")


@dataclass(frozen=True)
class DannConfig:
    model: ModelConfig
    epochs: int = 30
    batch_size: int = 64
    lr: float = 5e-4
    lambda_scale: float = 1.0
    domain_hidden: int = 64
    seed: int = 0


def direct_transfer_eval(artifact: ModelArtifact, target_test: LabeledDataset) -> FoldMetrics:
    """Score a frozen source-trained model on the target test set."""
    return direct_eval(artifact, target_test)


def inverse_frequency_weights(counts) -> np.ndarray:
    """Per-class weights proportional to 1/count, normalized to mean 1."""
    counts = np.asarray(counts, dtype=np.float64)
    if np.any(counts <= 0):
        raise EmptyClass(f"class counts {counts.tolist()} include an empty class")
    w = 1.0 / counts
    return w * (counts.size / w.sum())


def undersample_balanced(data: LabeledDataset, seed: int) -> LabeledDataset:
    """Every class downsampled (without replacement) to the minority count."""
    counts = data.class_counts()
    if np.any(counts == 0):
        raise EmptyClass(f"class counts {counts.tolist()} include an empty class")
    m = int(counts.min())
    rng = np.random.default_rng(seed)
    chosen = []
    for c in range(N_CLASSES):
        idx = np.flatnonzero(data.y == c)
        chosen.append(np.sort(rng.choice(idx, size=m, replace=False)))
    return data.subset(np.sort(np.concatenate(chosen)))


def _rebuild(artifact: ModelArtifact, X_like: np.ndarray) -> SequenceModel:
    if artifact.kind.is_forest:
        raise UnsupportedModelKind("fine-tuning applies to gradient models only")
    return artifact.build_model(steps=X_like.shape[1], n_channels=X_like.shape[2])


def fine_tune(
    artifact: ModelArtifact,
    target_train: LabeledDataset,
    target_val: LabeledDataset,
    strategy: FinetuneStrategy,
    seed: int = 0,
) -> ModelArtifact:
    """Adapt a source-trained model on labeled target data.

    R1: all parameters, full train split.
    R2: inverse-class-frequency weighted sampler and loss.
    R3: undersample every class to the minority count, then R1-style tuning.
    R4: half the epochs as R3, then half as R2 with only the head unfrozen;
        each stage restores its own minimum-validation-loss checkpoint, so the
        returned non-head parameters are exactly the stage-1 result.

    Source-fitted normalization stats are kept; refitting them on the target
    would silently change what the pretrained weights mean.
    """
    artifact.require_fingerprint(target_train.fingerprint)
    artifact.require_fingerprint(target_val.fingerprint)
    counts = target_train.class_counts()
    if np.any(counts == 0):
        raise EmptyClass(f"target train class counts {counts.tolist()} include an empty class")
    model = _rebuild(artifact, target_train.X)
    Xtr = artifact.normalize(target_train.X)
    Xva = artifact.normalize(target_val.X)
    rng = np.random.default_rng(seed)
    common = dict(lr=strategy.lr, batch_size=strategy.batch_size, rng=rng)
    logs: dict = {"strategy": strategy.name}

    if strategy.name == "R1":
        log = train_loop(model, Xtr, target_train.y, Xva, target_val.y, epochs=strategy.epochs, **common)
        logs["stages"] = [log.to_dict()]
    elif strategy.name == "R2":
        weights = inverse_frequency_weights(counts)
        log = train_loop(
            model,
            Xtr,
            target_train.y,
            Xva,
            target_val.y,
            epochs=strategy.epochs,
            class_weights=weights,
            weighted_sampler=True,
            **common,
        )
        logs["stages"] = [log.to_dict()]
    elif strategy.name == "R3":
        balanced = undersample_balanced(target_train, seed)
        log = train_loop(
            model, artifact.normalize(balanced.X), balanced.y, Xva, target_val.y, epochs=strategy.epochs, **common
        )
        logs["stages"] = [log.to_dict()]
    else:  # R4
        stage1_epochs = strategy.epochs // 2
        stage2_epochs = strategy.epochs - stage1_epochs
        balanced = undersample_balanced(target_train, seed)
        log1 = train_loop(
            model, artifact.normalize(balanced.X), balanced.y, Xva, target_val.y, epochs=stage1_epochs, **common
        )
        weights = inverse_frequency_weights(counts)
        head_only = {k for k in model.params if k.startswith(HEAD_PREFIX)}
        log2 = train_loop(
            model,
            Xtr,
            target_train.y,
            Xva,
            target_val.y,
            epochs=stage2_epochs,
            class_weights=weights,
            weighted_sampler=True,
            trainable=head_only,
            **common,
        )
        logs["stages"] = [log1.to_dict(), log2.to_dict()]

    return ModelArtifact(
        config=artifact.config,
        arrays=model.param_arrays(),
        fingerprint=artifact.fingerprint,
        training_log=logs,
        norm_mean=None if artifact.norm_mean is None else artifact.norm_mean.copy(),
        norm_std=None if artifact.norm_std is None else artifact.norm_std.copy(),
    )


# -- domain-adversarial training ------------------------------------------------


def grl_lambda(progress: float, scale: float = 1.0) -> float:
    """Adversarial weight schedule: 0 at the start, saturating toward `scale`."""
    return scale * (2.0 / (1.0 + np.exp(-10.0 * progress)) - 1.0)


def _domain_head_params(feature_dim: int, hidden: int, rng: np.random.Generator) -> dict:
    return {
        "dom.W1": ad.parameter(rng, (feature_dim, hidden), fan_in=feature_dim),
        "dom.b1": ad.Tensor(np.zeros(hidden), requires_grad=True),
        "dom.W2": ad.parameter(rng, (hidden, 2), fan_in=hidden),
        "dom.b2": ad.Tensor(np.zeros(2), requires_grad=True),
    }


def _domain_logits(feats, dom: dict):
    h = ad.relu(ad.add(ad.matmul(feats, dom["dom.W1"]), dom["dom.b1"]))
    return ad.add(ad.matmul(h, dom["dom.W2"]), dom["dom.b2"])


def dann_train(source: LabeledDataset, target_adapt_X: np.ndarray, cfg: DannConfig) -> ModelArtifact:
    """Adversarial feature alignment without target labels.

    Each step draws one source batch and one equal-size target batch.  Source
    features feed the 3-class head (classification loss) and both domains'
    features feed the binary domain head through a gradient-reversal layer
    whose lambda ramps up with training progress.  A single train/test split:
    no validation checkpointing; the final parameters are returned.
    """
    if target_adapt_X.shape[1:] != source.X.shape[1:]:
        raise FingerprintMismatch(
            f"target pool shape {target_adapt_X.shape[1:]} vs source {source.X.shape[1:]}"
        )
    stats = NormStats.fit(source.X)
    Xs = stats.apply(source.X)
    Xt = stats.apply(np.asarray(target_adapt_X, dtype=np.float64))
    ys = source.y
    rng = np.random.default_rng(cfg.seed)
    model = SequenceModel(cfg.model, n_channels=Xs.shape[2], steps=Xs.shape[1], rng=rng)
    dom = _domain_head_params(model.feature_dim, cfg.domain_hidden, rng)
    all_params = dict(model.params)
    all_params.update(dom)
    opt = ad.Adam(all_params, lr=cfg.lr)

    n_s, n_t = Xs.shape[0], Xt.shape[0]
    steps_per_epoch = max(1, (n_s + cfg.batch_size - 1) // cfg.batch_size)
    total_steps = cfg.epochs * steps_per_epoch
    log: dict = {"epochs": [], "schedule": "2/(1+exp(-10p))-1"}
    t_order = rng.permutation(n_t)
    t_pos = 0
    step_counter = 0
    for epoch in range(cfg.epochs):
        s_order = rng.permutation(n_s)
        ep_label_loss = 0.0
        ep_domain_loss = 0.0
        ep_domain_correct = 0
        ep_domain_total = 0
        for b in range(steps_per_epoch):
            s_idx = s_order[b * cfg.batch_size : (b + 1) * cfg.batch_size]
            if s_idx.size == 0:
                continue
            # cycle the target pool, reshuffling on wraparound
            t_idx = np.empty(s_idx.size, dtype=np.int64)
            for i in range(s_idx.size):
                if t_pos == n_t:
                    t_order = rng.permutation(n_t)
                    t_pos = 0
                t_idx[i] = t_order[t_pos]
                t_pos += 1
            lam = grl_lambda(step_counter / max(total_steps - 1, 1), cfg.lambda_scale)
            step_counter += 1

            opt.zero_grad()
            feat_s = model.features(Xs[s_idx], train=True, rng=rng)
            feat_t = model.features(Xt[t_idx], train=True, rng=rng)
            label_logits = model.head(feat_s)
            label_loss = ad.cross_entropy(label_logits, ys[s_idx])
            both = ad.concat([feat_s, feat_t], axis=0)
            dom_logits = _domain_logits(ad.gradient_reversal(both, lam), dom)
            dom_y = np.concatenate([np.zeros(s_idx.size, dtype=np.int64), np.ones(t_idx.size, dtype=np.int64)])
            dom_loss = ad.cross_entropy(dom_logits, dom_y)
            total = ad.add(label_loss, dom_loss)
            if not np.isfinite(float(total.data)):
                raise NonFiniteLoss(f"adversarial training diverged at epoch {epoch}")
            total.backward()
            opt.step()

            ep_label_loss += float(label_loss.data)
            ep_domain_loss += float(dom_loss.data)
            ep_domain_correct += int((np.argmax(dom_logits.data, axis=1) == dom_y).sum())
            ep_domain_total += dom_y.size
        log["epochs"].append(
            {
                "epoch": epoch,
                "label_loss": ep_label_loss / steps_per_epoch,
                "domain_loss": ep_domain_loss / steps_per_epoch,
                "domain_accuracy": ep_domain_correct / max(ep_domain_total, 1),
                "lambda": lam,
            }
        )

    log["final_domain_accuracy"] = _domain_accuracy(model, dom, Xs, Xt, cfg.batch_size)
    arrays = model.param_arrays()
    for name, t in dom.items():
        arrays[name] = t.data.copy()
    return ModelArtifact(
        config=cfg.model.to_dict(),
        arrays=arrays,
        fingerprint=source.fingerprint.to_dict(),
        training_log=log,
        norm_mean=stats.mean.copy(),
        norm_std=stats.std.copy(),
    )


def _domain_accuracy(model: SequenceModel, dom: dict, Xs: np.ndarray, Xt: np.ndarray, batch_size: int) -> float:
    correct = 0
    total = 0
    for X, label in ((Xs, 0), (Xt, 1)):
        for start in range(0, X.shape[0], batch_size):
            feats = model.features(X[start : start + batch_size])
            logits = _domain_logits(feats, dom)
            correct += int((np.argmax(logits.data, axis=1) == label).sum())
            total += logits.shape[0]
    return correct / max(total, 1)


def multi_source_compose(domains: list, total: int, seed: int = 0) -> LabeledDataset:
    """Even draw across domains (remainder to the earliest), preserving each
    domain's class proportions via largest-remainder apportionment."""
    if not domains:
        raise DataError("no domains given")
    fp: Fingerprint = domains[0].fingerprint
    for d in domains[1:]:
        fp.require_match(d.fingerprint)
    k = len(domains)
    quotas = np.full(k, total // k, dtype=np.int64)
    quotas[: total % k] += 1
    seeds = np.random.SeedSequence(seed).spawn(k)
    parts = []
    for dom, quota, ss in zip(domains, quotas, seeds):
        if quota > len(dom):
            raise InsufficientSamples(f"domain with {len(dom)} samples cannot supply {quota}")
        counts = dom.class_counts()
        share = counts / counts.sum()
        raw = share * quota
        want = np.floor(raw).astype(np.int64)
        rem = quota - want.sum()
        order = np.argsort(-(raw - want), kind="stable")
        for j in order[:rem]:
            want[j] += 1
        rng = np.random.default_rng(ss)
        chosen = []
        for c in range(N_CLASSES):
            idx = np.flatnonzero(dom.y == c)
            if want[c] > idx.size:
                raise InsufficientSamples(f"class {c}: need {want[c]}, domain has {idx.size}")
            if want[c] > 0:
                chosen.append(np.sort(rng.choice(idx, size=int(want[c]), replace=False)))
        parts.append(dom.subset(np.sort(np.concatenate(chosen))) if chosen else dom.subset(np.empty(0, dtype=np.int64)))
    X = np.concatenate([p.X for p in parts], axis=0)
    y = np.concatenate([p.y for p in parts], axis=0)
    ids = tuple(pid for p in parts for pid in (p.pixel_ids or ()))
    return LabeledDataset(X=X, y=y, fingerprint=fp, pixel_ids=ids if len(ids) == X.shape[0] else ())
