import math

import numpy as np
import pytest

from qrfs.errors import ValidationError
from qrfs.evaluation import (ConfusionCounts, LabeledDataset, confusion,
                             cross_validate, dobscv_folds, knn_classify,
                             macro_metrics, metrics, train_tree, tree_classify)

from helpers import separable_toy


def make_ds(x, y, classes=2):
    return LabeledDataset(x=np.asarray(x, dtype=float), y=np.asarray(y),
                          class_count=classes)


class TestKnnClassify:
    def test_query_on_training_point(self):
        ds = make_ds([[0.0], [10.0]], [0, 1])
        assert knn_classify(ds, [[10.0]], k=1).tolist() == [1]

    def test_nearest_of_two_clusters(self):
        ds = make_ds([[0.0], [10.0]], [0, 1])
        assert knn_classify(ds, [[2.0]], k=1).tolist() == [0]

    def test_against_brute_force_oracle(self, rng):
        x = rng.standard_normal((50, 3))
        y = rng.integers(0, 3, size=50)
        ds = LabeledDataset(x=x, y=y, class_count=3)
        queries = rng.standard_normal((20, 3))
        got = knn_classify(ds, queries, k=5)
        for qi in range(20):
            dists = sorted((float(np.sum((x[t] - queries[qi]) ** 2)), t)
                           for t in range(50))
            votes = np.bincount([y[t] for _, t in dists[:5]], minlength=3)
            assert got[qi] == int(np.argmax(votes))

    def test_k_equals_train_size_predicts_majority(self, rng):
        x = rng.standard_normal((9, 2))
        y = np.array([0, 0, 0, 0, 0, 1, 1, 1, 1])
        ds = LabeledDataset(x=x, y=y, class_count=2)
        queries = rng.standard_normal((6, 2)) * 100
        assert np.all(knn_classify(ds, queries, k=9) == 0)

    def test_vote_tie_breaks_to_lower_class(self):
        ds = make_ds([[0.0], [1.0]], [1, 0])
        assert knn_classify(ds, [[0.5]], k=2).tolist() == [0]

    def test_validation(self):
        ds = make_ds([[0.0], [1.0]], [0, 1])
        with pytest.raises(ValidationError):
            knn_classify(ds, [[0.0]], k=0)
        with pytest.raises(ValidationError):
            knn_classify(ds, [[0.0]], k=3)


class TestTree:
    def test_threshold_separable_is_depth_one(self):
        ds = make_ds([[0.0], [1.0], [2.0], [10.0], [11.0], [12.0]],
                     [0, 0, 0, 1, 1, 1])
        model = train_tree(ds)
        assert not model.root.is_leaf
        assert model.root.left.is_leaf and model.root.right.is_leaf
        assert np.array_equal(tree_classify(model, ds.x), ds.y)

    def test_single_class_constant_predictor(self, rng):
        ds = make_ds(rng.standard_normal((8, 3)), [1] * 8)
        model = train_tree(ds)
        assert model.root.is_leaf
        assert np.all(tree_classify(model, rng.standard_normal((5, 3))) == 1)

    def test_xor_needs_depth_two(self):
        x = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
        y = np.array([0, 1, 1, 0])
        model = train_tree(make_ds(x, y))
        assert np.array_equal(tree_classify(model, x), y)

    def test_max_depth_zero_is_majority(self):
        ds = make_ds([[0.0], [1.0], [2.0]], [0, 1, 1])
        model = train_tree(ds, max_depth=0)
        assert model.root.is_leaf and model.root.label == 1

    def test_min_leaf_respected(self):
        ds = make_ds([[0.0], [1.0], [2.0], [3.0]], [0, 1, 1, 1])
        model = train_tree(ds, min_leaf=2)
        if not model.root.is_leaf:
            def smallest(node, n):
                if node.is_leaf:
                    return n
                return min(smallest(node.left, n), smallest(node.right, n))
            # structural check: the split at the root is 2 vs 2
            assert model.root.threshold >= 1.0


class TestConfusion:
    def test_all_correct_positive(self):
        c = confusion([1, 1, 1], [1, 1, 1])
        assert (c.tp, c.tn, c.fp, c.fn) == (3, 0, 0, 0)

    def test_complement_predictions(self):
        c = confusion([0, 1, 0, 1], [1, 0, 1, 0])
        assert c.tp == 0 and c.tn == 0 and c.fp == 2 and c.fn == 2

    def test_hand_counted_example(self):
        c = confusion([1, 1, 0, 1, 0], [1, 0, 0, 1, 1])
        assert (c.tp, c.tn, c.fp, c.fn) == (2, 1, 1, 1)

    def test_length_mismatch(self):
        with pytest.raises(ValidationError):
            confusion([1, 0], [1])


class TestMetrics:
    def test_formula_block_example(self):
        mv = metrics(ConfusionCounts(tp=2, tn=1, fp=1, fn=1))
        assert mv.accuracy == pytest.approx(0.6)
        assert mv.sensitivity == pytest.approx(2 / 3)
        assert mv.specificity == pytest.approx(0.5)
        assert mv.precision == pytest.approx(2 / 3)
        assert mv.recall == mv.sensitivity
        assert mv.f1 == pytest.approx(2 / 3)
        assert mv.g_mean == pytest.approx(math.sqrt(1 / 3))

    def test_all_correct(self):
        mv = metrics(ConfusionCounts(tp=3, tn=4, fp=0, fn=0))
        for name in ("accuracy", "sensitivity", "specificity", "g_mean",
                     "precision", "recall", "f1"):
            assert getattr(mv, name) == 1.0

    def test_no_positive_truth_flags_sensitivity(self):
        mv = metrics(ConfusionCounts(tp=0, tn=5, fp=0, fn=0))
        assert mv.sensitivity is None
        assert mv.g_mean is None
        assert "sensitivity" in mv.to_dict()["undefined"]
        assert "accuracy" in mv.to_dict()

    def test_identities_on_random_counts(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            tp, tn, fp, fn = (int(v) for v in rng.integers(0, 20, size=4))
            if tp + tn + fp + fn == 0:
                continue
            mv = metrics(ConfusionCounts(tp=tp, tn=tn, fp=fp, fn=fn))
            if mv.g_mean is not None:
                assert abs(mv.g_mean ** 2 - mv.sensitivity * mv.specificity) <= 1e-12
            if mv.f1 is not None:
                assert abs(mv.f1 - 2 * mv.precision * mv.recall
                           / (mv.precision + mv.recall)) <= 1e-12

    def test_macro_metrics_multiclass(self):
        pred = [0, 1, 2, 2, 1, 0]
        truth = [0, 1, 2, 1, 1, 2]
        mv = macro_metrics(pred, truth, 3)
        assert mv.accuracy is not None and 0 <= mv.accuracy <= 1


class TestDobscvFolds:
    def test_two_balanced_classes_five_folds(self, rng):
        x = rng.standard_normal((10, 2))
        y = np.array([0, 1] * 5)
        ds = LabeledDataset(x=x, y=y, class_count=2)
        fa = dobscv_folds(ds, 5, seed=0)
        for f in range(5):
            idx = fa.test_indices(f)
            assert idx.size == 2
            assert sorted(y[idx]) == [0, 1]

    def test_single_fold_degenerate(self, rng):
        ds = LabeledDataset(x=rng.standard_normal((6, 2)),
                            y=np.array([0, 1] * 3), class_count=2)
        fa = dobscv_folds(ds, 1, seed=0)
        assert np.all(fa.fold_of == 0)

    def test_three_class_balance_by_counting_oracle(self, rng):
        x = rng.standard_normal((30, 4))
        y = np.repeat([0, 1, 2], [12, 10, 8])
        ds = LabeledDataset(x=x, y=y, class_count=3)
        fa = dobscv_folds(ds, 4, seed=7)
        for c in range(3):
            sizes = [int(np.sum((fa.fold_of == f) & (y == c))) for f in range(4)]
            assert max(sizes) - min(sizes) <= 1
        assert np.all(fa.fold_of >= 0)

    def test_small_class_error_names_class(self, rng):
        ds = LabeledDataset(x=rng.standard_normal((8, 2)),
                            y=np.array([0] * 6 + [1] * 2), class_count=2)
        with pytest.raises(ValidationError, match="class 1"):
            dobscv_folds(ds, 3, seed=0)

    def test_deterministic(self, rng):
        x = rng.standard_normal((20, 3))
        y = np.array([0, 1] * 10)
        ds = LabeledDataset(x=x, y=y, class_count=2)
        a = dobscv_folds(ds, 5, seed=42)
        b = dobscv_folds(ds, 5, seed=42)
        assert np.array_equal(a.fold_of, b.fold_of)


class TestCrossValidate:
    def test_perfect_classifier_on_separable_data(self):
        data = separable_toy(seed=0)
        folds = dobscv_folds(data, 5, seed=0)
        report = cross_validate(data, None, ("knn", {"k": 1}), folds)
        assert report.pooled_metrics.accuracy == 1.0

    def test_constant_classifier_on_balanced_data(self):
        data = separable_toy(seed=1)
        folds = dobscv_folds(data, 5, seed=0)
        report = cross_validate(data, None, ("tree", {"max_depth": 0}), folds)
        assert report.pooled_metrics.accuracy == pytest.approx(0.5, abs=0.05)

    def test_fixed_seed_reproducible(self):
        data = separable_toy(seed=2)
        folds = dobscv_folds(data, 5, seed=3)
        r1 = cross_validate(data, [0], ("knn", {"k": 3}), folds)
        r2 = cross_validate(data, [0], ("knn", {"k": 3}), folds)
        assert r1.to_dict() == r2.to_dict()

    def test_selection_sees_only_training_rows(self):
        # row i carries the marker value i in feature 0; the spy selector
        # records every marker it is shown
        m = 20
        x = np.zeros((m, 2))
        x[:, 0] = np.arange(m)
        x[:, 1] = np.arange(m) % 2
        data = LabeledDataset(x=x, y=np.arange(m) % 2, class_count=2)
        folds = dobscv_folds(data, 4, seed=0)
        seen = []

        def spy(x_train, y_train):
            seen.append(set(int(v) for v in x_train[:, 0]))
            return [1]

        cross_validate(data, spy, ("knn", {"k": 1}), folds)
        for fold in range(4):
            held_out = set(int(v) for v in folds.test_indices(fold))
            assert seen[fold] == set(range(m)) - held_out

    def test_per_fold_and_pooled_consistent(self):
        data = separable_toy(seed=3)
        folds = dobscv_folds(data, 5, seed=1)
        report = cross_validate(data, None, ("knn", {"k": 3}), folds)
        total = sum(cc.total for cc, _ in report.per_fold)
        assert total == data.n_samples
        assert report.pooled_confusion.total == data.n_samples

    def test_empty_selector_rejected(self):
        data = separable_toy(seed=0)
        folds = dobscv_folds(data, 2, seed=0)
        with pytest.raises(ValidationError):
            cross_validate(data, [], ("knn", {"k": 1}), folds)


class TestLabeledDataset:
    def test_validation(self, rng):
        with pytest.raises(ValidationError):
            LabeledDataset(x=rng.standard_normal((4, 2)), y=np.array([0, 1]),
                           class_count=2)
        with pytest.raises(ValidationError):
            LabeledDataset(x=rng.standard_normal((2, 2)), y=np.array([0, 2]),
                           class_count=2)
        with pytest.raises(ValidationError):
            LabeledDataset(x=rng.standard_normal((2, 2)), y=np.array([0, 0]),
                           class_count=1)

    def test_subset(self, rng):
        ds = LabeledDataset(x=rng.standard_normal((6, 4)),
                            y=np.array([0, 1] * 3), class_count=2)
        sub = ds.subset([0, 2, 4], [1, 3])
        assert sub.x.shape == (3, 2)
        assert sub.y.tolist() == [0, 0, 0]
