"""Scoring, trimmed aggregation, stratified k-fold, cross-validation plumbing."""

import numpy as np
import pytest

from conftest import blob_dataset

from cropmap.dataset import Fingerprint, LabeledDataset
from cropmap.errors import FingerprintMismatch, LengthMismatch, TooFewSamples, TooFewValues
from cropmap.evaluate import (
    cross_validate,
    direct_eval,
    evaluate_fold,
    kfold_split,
    score,
    train_once,
    trimmed_fold_mean,
)
from cropmap.models.config import ModelConfig

RF_CFG = ModelConfig(kind="rf", n_estimators=7, max_features=3, seed=1)


class TestScore:
    def test_hand_confusion_fixture(self):
        preds = [0, 0, 1, 2, 2, 2]
        truth = [0, 1, 1, 2, 2, 0]
        m = score(preds, truth)
        assert m.oa == 4.0 / 6.0
        np.testing.assert_array_equal(m.support, [2, 2, 2])
        np.testing.assert_array_equal(m.per_class, [0.5, 0.5, 1.0])
        np.testing.assert_array_equal(
            m.confusion,
            [[0.5, 0.0, 0.5], [0.5, 0.5, 0.0], [0.0, 0.0, 1.0]],
        )

    def test_rows_are_normalized(self):
        rng = np.random.default_rng(0)
        truth = rng.integers(0, 3, size=200)
        preds = rng.integers(0, 3, size=200)
        m = score(preds, truth)
        np.testing.assert_allclose(m.confusion.sum(axis=1), 1.0, atol=1e-15)

    def test_zero_support_row_is_zero_not_nan(self):
        m = score([0, 2, 2], [0, 2, 2])  # class 1 absent
        np.testing.assert_array_equal(m.confusion[1], [0.0, 0.0, 0.0])
        assert m.per_class[1] == 0.0
        assert m.support[1] == 0
        assert m.oa == 1.0
        assert not np.any(np.isnan(m.confusion))

    def test_perfect_predictions(self):
        m = score([0, 1, 2, 1], [0, 1, 2, 1])
        assert m.oa == 1.0
        np.testing.assert_array_equal(m.per_class, [1.0, 1.0, 1.0])
        np.testing.assert_array_equal(m.confusion, np.eye(3))

    def test_length_mismatch_raises(self):
        with pytest.raises(LengthMismatch):
            score([0, 1], [0, 1, 2])

    def test_empty_raises(self):
        with pytest.raises(LengthMismatch):
            score([], [])

    def test_to_dict_timing_segregation(self):
        m = score([0, 1], [0, 1])
        m.train_seconds = 1.5
        m.predict_seconds = 0.5
        with_t = m.to_dict(include_timings=True)
        without = m.to_dict(include_timings=False)
        assert with_t["train_seconds"] == 1.5
        assert "train_seconds" not in without
        assert "predict_seconds" not in without
        assert without == {k: v for k, v in with_t.items()
                           if k not in ("train_seconds", "predict_seconds")}


class TestTrimmedFoldMean:
    def test_drops_one_min_and_one_max(self):
        assert trimmed_fold_mean([1.0, 2.0, 3.0, 4.0, 100.0]) == 3.0

    def test_duplicate_extremes_drop_single_copy(self):
        assert trimmed_fold_mean([0.0, 0.0, 10.0]) == 0.0
        assert trimmed_fold_mean([5.0, 5.0, 5.0, 5.0]) == 5.0

    def test_order_invariant(self):
        vals = [0.93, 0.91, 0.97, 0.89, 0.95]
        assert trimmed_fold_mean(vals) == trimmed_fold_mean(sorted(vals))
        assert trimmed_fold_mean(vals) == np.mean([0.91, 0.93, 0.95])

    def test_requires_three_values(self):
        with pytest.raises(TooFewValues):
            trimmed_fold_mean([0.9, 0.8])


class TestKFoldSplit:
    def test_per_class_fold_counts_within_one(self):
        rng = np.random.default_rng(0)
        y = np.concatenate([np.zeros(33), np.ones(25), np.full(17, 2)]).astype(int)
        y = y[rng.permutation(y.size)]
        folds = kfold_split(y, k=10, seed=3)
        assert folds.shape == y.shape
        for c in range(3):
            per_fold = np.bincount(folds[y == c], minlength=10)
            assert per_fold.max() - per_fold.min() <= 1

    def test_all_folds_populated(self):
        y = np.arange(40) % 3
        folds = kfold_split(y, k=10, seed=0)
        assert set(folds) == set(range(10))

    def test_deterministic_per_seed(self):
        y = np.arange(50) % 3
        np.testing.assert_array_equal(kfold_split(y, 10, seed=4), kfold_split(y, 10, seed=4))
        assert not np.array_equal(kfold_split(y, 10, seed=4), kfold_split(y, 10, seed=5))

    def test_too_few_samples(self):
        with pytest.raises(TooFewSamples):
            kfold_split(np.zeros(5, dtype=int), k=10)


class TestCrossValidate:
    def test_fold_metrics_and_trimmed_mean(self):
        data = blob_dataset(n_per_class=30, seed=0)
        report = cross_validate(data, RF_CFG, k=5, seed=0)
        assert len(report.folds) == 5
        assert report.trimmed_mean_oa == trimmed_fold_mean([m.oa for m in report.folds])
        # blobs are cleanly separable, every fold should be perfect
        assert all(m.oa == 1.0 for m in report.folds)
        # fold test sizes partition the data
        assert sum(int(m.support.sum()) for m in report.folds) == len(data)

    def test_deterministic_without_timings(self):
        data = blob_dataset(n_per_class=12, seed=1, spread=2.5)
        a = cross_validate(data, RF_CFG, k=3, seed=7).to_dict(include_timings=False)
        b = cross_validate(data, RF_CFG, k=3, seed=7).to_dict(include_timings=False)
        assert a == b

    def test_worker_count_does_not_change_results(self):
        data = blob_dataset(n_per_class=12, seed=1, spread=2.5)
        serial = cross_validate(data, RF_CFG, k=3, seed=7, jobs=1).to_dict(include_timings=False)
        parallel = cross_validate(data, RF_CFG, k=3, seed=7, jobs=2).to_dict(include_timings=False)
        assert serial == parallel

    def test_timings_recorded(self):
        data = blob_dataset(n_per_class=10, seed=2)
        report = cross_validate(data, RF_CFG, k=3, seed=0)
        assert all(m.train_seconds > 0 for m in report.folds)
        assert all(m.predict_seconds > 0 for m in report.folds)


class TestEvaluateFold:
    def test_fold_support_matches_holdout(self):
        data = blob_dataset(n_per_class=20, seed=0)
        folds = kfold_split(data.y, k=4, seed=0)
        m = evaluate_fold(data, folds, fold=2, cfg=RF_CFG)
        assert int(m.support.sum()) == int(np.sum(folds == 2))

    def test_sequence_kind_uses_validation_split(self):
        data = blob_dataset(n_per_class=15, seed=0)
        folds = kfold_split(data.y, k=3, seed=0)
        cfg = ModelConfig(kind="gru", hidden_size=6, dropout=0.0, seed=2,
                          lr=0.01, batch_size=32, epochs=2)
        m = evaluate_fold(data, folds, fold=0, cfg=cfg)
        assert 0.0 <= m.oa <= 1.0


class TestDirectEval:
    def test_perfect_on_separable_holdout(self):
        train = blob_dataset(n_per_class=30, seed=0)
        test = blob_dataset(n_per_class=10, seed=5)
        artifact = train_once(train, train, RF_CFG)
        m = direct_eval(artifact, test)
        assert m.oa == 1.0
        assert m.train_seconds == 0.0
        assert m.predict_seconds > 0.0

    def test_fingerprint_mismatch_rejected(self):
        train = blob_dataset(n_per_class=10, seed=0)
        artifact = train_once(train, train, RF_CFG)
        other = blob_dataset(n_per_class=4, seed=1)
        other.fingerprint = Fingerprint(method="linear_30d", start_doy=111,
                                        interval_days=30, steps=5, channel_names=("b0",))
        with pytest.raises(FingerprintMismatch):
            direct_eval(artifact, other)

    def test_rf_training_log_counts_samples(self):
        train = blob_dataset(n_per_class=10, seed=0)
        artifact = train_once(train, train, RF_CFG)
        assert artifact.training_log == {"n_train": 30}
