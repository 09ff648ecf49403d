"""Classifiers, metrics, DOB-SCV folding and the cross-validation driver.

The classifier slot offers a k-nearest-neighbor voter and an entropy-gain
axis-aligned decision tree (a pruning-free stand-in for C4.5). Metrics follow
the usual confusion-count formulas; any 0/0 is reported as undefined rather
than imputed. Folds come from distribution-optimally-balanced stratified
cross-validation: per class, a random unassigned sample and its nearest
unassigned same-class neighbors are dealt across folds, which bounds
per-class fold-size differences by one.

Everything here is deterministic for a fixed seed: distance ties break on the
lower sample index, vote ties on the lower class code, split ties on the
lower feature index then threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .matrix import as_matrix

METRIC_NAMES = ("accuracy", "sensitivity", "specificity", "g_mean",
                "precision", "recall", "f1")


@dataclass(frozen=True)
class LabeledDataset:
    """Samples-by-features matrix with dense integer class labels.

    label_names maps a class code back to the original label string when the
    dataset came from a file.
    """

    x: np.ndarray
    y: np.ndarray
    class_count: int
    feature_names: tuple[str, ...] | None = None
    label_names: tuple[str, ...] | None = None

    def __post_init__(self):
        x = as_matrix(self.x, "x")
        y = np.asarray(self.y, dtype=np.int64)
        if y.ndim != 1 or y.shape[0] != x.shape[0]:
            raise ValidationError("y must be 1-D with one label per sample")
        if self.class_count < 2:
            raise ValidationError("class_count must be >= 2")
        if y.size and (y.min() < 0 or y.max() >= self.class_count):
            raise ValidationError("labels must be densely coded in [0, class_count)")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n_samples(self) -> int:
        return self.x.shape[0]

    @property
    def n_features(self) -> int:
        return self.x.shape[1]

    def subset(self, rows, features=None) -> "LabeledDataset":
        rows = np.asarray(rows)
        x = self.x[rows]
        if features is not None:
            x = x[:, np.asarray(features)]
        return LabeledDataset(x=x, y=self.y[rows], class_count=self.class_count)


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    def to_dict(self) -> dict:
        return {"tp": self.tp, "tn": self.tn, "fp": self.fp, "fn": self.fn}


@dataclass(frozen=True)
class MetricVector:
    """The seven confusion-count metrics; None marks an undefined (0/0) value."""

    accuracy: float | None
    sensitivity: float | None
    specificity: float | None
    g_mean: float | None
    precision: float | None
    recall: float | None
    f1: float | None

    def to_dict(self) -> dict:
        out = {}
        undefined = []
        for name in METRIC_NAMES:
            value = getattr(self, name)
            if value is None:
                undefined.append(name)
            else:
                out[name] = value
        out["undefined"] = undefined
        return out


@dataclass(frozen=True)
class FoldAssignment:
    fold_of: np.ndarray
    n_folds: int
    seed: int

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of != fold)


def knn_classify(train: LabeledDataset, queries, k: int) -> np.ndarray:
    """Majority vote over the k nearest training samples by Euclidean distance."""
    if train.n_samples < 1:
        raise ValidationError("training set is empty")
    if not 1 <= k <= train.n_samples:
        raise ValidationError(f"k must lie in [1, {train.n_samples}], got {k}")
    q = as_matrix(queries, "queries")
    if q.shape[1] != train.n_features:
        raise ValidationError("query feature count does not match training data")
    d2 = (np.sum(q * q, axis=1)[:, None]
          + np.sum(train.x * train.x, axis=1)[None, :]
          - 2.0 * (q @ train.x.T))
    nearest = np.argsort(d2, axis=1, kind="stable")[:, :k]
    votes = train.y[nearest]
    counts = np.zeros((q.shape[0], train.class_count), dtype=np.int64)
    for c in range(train.class_count):
        counts[:, c] = np.sum(votes == c, axis=1)
    return np.argmax(counts, axis=1)


@dataclass(frozen=True)
class TreeNode:
    feature: int = -1
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    label: int = 0

    @property
    def is_leaf(self) -> bool:
        return self.left is None


@dataclass(frozen=True)
class TreeModel:
    root: TreeNode
    n_features: int


def _entropy(y: np.ndarray, class_count: int) -> float:
    counts = np.bincount(y, minlength=class_count)
    p = counts[counts > 0] / y.size
    return float(-np.sum(p * np.log2(p)))


def _majority(y: np.ndarray, class_count: int) -> int:
    return int(np.argmax(np.bincount(y, minlength=class_count)))


def _grow(x, y, class_count, depth, max_depth, min_leaf) -> TreeNode:
    label = _majority(y, class_count)
    if (max_depth is not None and depth >= max_depth) or np.unique(y).size <= 1:
        return TreeNode(label=label)
    parent_h = _entropy(y, class_count)
    n = y.size
    best = None  # (gain, feature, threshold)
    for feat in range(x.shape[1]):
        values = np.unique(x[:, feat])
        if values.size < 2:
            continue
        for lo, hi in zip(values[:-1], values[1:]):
            thr = 0.5 * (lo + hi)
            mask = x[:, feat] <= thr
            nl = int(np.count_nonzero(mask))
            if nl < min_leaf or n - nl < min_leaf:
                continue
            gain = parent_h - (nl / n) * _entropy(y[mask], class_count) \
                - ((n - nl) / n) * _entropy(y[~mask], class_count)
            if best is None or gain > best[0]:
                best = (gain, feat, thr)
    if best is None:
        return TreeNode(label=label)
    _, feat, thr = best
    mask = x[:, feat] <= thr
    return TreeNode(feature=feat, threshold=thr,
                    left=_grow(x[mask], y[mask], class_count, depth + 1, max_depth, min_leaf),
                    right=_grow(x[~mask], y[~mask], class_count, depth + 1, max_depth, min_leaf),
                    label=label)


def train_tree(train: LabeledDataset, max_depth: int | None = None,
               min_leaf: int = 1) -> TreeModel:
    """Greedy entropy-gain tree on midpoint thresholds.

    An impure node splits on the best-gain (feature, threshold) pair even at
    zero gain, provided both children hold at least min_leaf samples; ties
    keep the lowest feature index, then the lowest threshold. Single-class
    input yields a depth-0 tree.
    """
    if min_leaf < 1:
        raise ValidationError("min_leaf must be >= 1")
    if max_depth is not None and max_depth < 0:
        raise ValidationError("max_depth must be >= 0")
    root = _grow(train.x, train.y, train.class_count, 0, max_depth, min_leaf)
    return TreeModel(root=root, n_features=train.n_features)


def tree_classify(model: TreeModel, queries) -> np.ndarray:
    q = as_matrix(queries, "queries")
    if q.shape[1] != model.n_features:
        raise ValidationError("query feature count does not match the model")
    out = np.empty(q.shape[0], dtype=np.int64)
    for i, row in enumerate(q):
        node = model.root
        while not node.is_leaf:
            node = node.left if row[node.feature] <= node.threshold else node.right
        out[i] = node.label
    return out


def confusion(pred, truth, positive_class: int = 1) -> ConfusionCounts:
    """Exact confusion counts with everything != positive_class as negative."""
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise ValidationError(
            f"prediction and truth lengths differ: {pred.shape} vs {truth.shape}")
    p = pred == positive_class
    t = truth == positive_class
    return ConfusionCounts(tp=int(np.sum(p & t)), tn=int(np.sum(~p & ~t)),
                           fp=int(np.sum(p & ~t)), fn=int(np.sum(~p & t)))


def metrics(c: ConfusionCounts) -> MetricVector:
    """The seven confusion-count metrics; 0/0 denominators yield None."""
    if c.total < 1:
        raise ValidationError("metrics need at least one evaluated sample")

    def ratio(num, den):
        return num / den if den > 0 else None

    accuracy = (c.tp + c.tn) / c.total
    sensitivity = ratio(c.tp, c.tp + c.fn)
    specificity = ratio(c.tn, c.tn + c.fp)
    precision = ratio(c.tp, c.tp + c.fp)
    g_mean = (math.sqrt(sensitivity * specificity)
              if sensitivity is not None and specificity is not None else None)
    if precision is None or sensitivity is None or precision + sensitivity == 0:
        f1 = None
    else:
        f1 = 2.0 * precision * sensitivity / (precision + sensitivity)
    return MetricVector(accuracy=accuracy, sensitivity=sensitivity,
                        specificity=specificity, g_mean=g_mean,
                        precision=precision, recall=sensitivity, f1=f1)


def macro_metrics(pred, truth, class_count: int) -> MetricVector:
    """One-vs-rest macro average; a metric is the mean over classes where it
    is defined, or None when undefined for every class."""
    per_class = [metrics(confusion(pred, truth, positive_class=c))
                 for c in range(class_count)]
    values = {}
    for name in METRIC_NAMES:
        defined = [getattr(mv, name) for mv in per_class if getattr(mv, name) is not None]
        values[name] = float(np.mean(defined)) if defined else None
    return MetricVector(**values)


def dobscv_folds(data: LabeledDataset, n_folds: int, seed: int = 0) -> FoldAssignment:
    """Distribution-optimally-balanced stratified folds.

    Per class: pick a seeded-random unassigned sample, gather its
    n_folds - 1 nearest unassigned same-class neighbors, and deal the group
    to folds 0..n_folds-1 in order; a final short group goes to the currently
    smallest folds. Per-class fold sizes therefore differ by at most one.
    """
    if n_folds < 1:
        raise ValidationError("n_folds must be >= 1")
    counts = np.bincount(data.y, minlength=data.class_count)
    for cls, cnt in enumerate(counts):
        if cnt < n_folds:
            raise ValidationError(
                f"class {cls} has {cnt} samples, fewer than n_folds = {n_folds}")
    rng = np.random.default_rng(seed)
    fold_of = np.full(data.n_samples, -1, dtype=np.int64)
    for cls in range(data.class_count):
        members = np.flatnonzero(data.y == cls)
        xc = data.x[members]
        diff = xc[:, None, :] - xc[None, :, :]
        d2 = np.sum(diff * diff, axis=2)
        pool = list(range(members.size))
        sizes = np.zeros(n_folds, dtype=np.int64)
        while pool:
            anchor = pool[int(rng.integers(len(pool)))]
            others = [p for p in pool if p != anchor]
            others.sort(key=lambda p: (d2[anchor, p], p))
            group = [anchor] + others[:n_folds - 1]
            if len(group) == n_folds:
                targets = range(n_folds)
            else:
                targets = np.argsort(sizes, kind="stable")[:len(group)]
            for member, fold in zip(group, targets):
                fold_of[members[member]] = int(fold)
                sizes[fold] += 1
            pool = [p for p in pool if p not in set(group)]
    return FoldAssignment(fold_of=fold_of, n_folds=n_folds, seed=seed)


@dataclass(frozen=True)
class EvaluationReport:
    """Per-fold and pooled confusion counts plus metric summaries."""

    n_folds: int
    classifier: tuple
    positive_class: int
    per_fold: tuple
    pooled_confusion: ConfusionCounts | None
    pooled_metrics: MetricVector
    mean_metrics: dict
    sd_metrics: dict
    warnings: tuple = ()

    def to_dict(self) -> dict:
        return {
            "n_folds": self.n_folds,
            "classifier": {"name": self.classifier[0], "params": dict(self.classifier[1])},
            "positive_class": self.positive_class,
            "per_fold": [
                {"confusion": cc.to_dict() if cc else None, "metrics": mv.to_dict()}
                for cc, mv in self.per_fold
            ],
            "pooled": {
                "confusion": self.pooled_confusion.to_dict() if self.pooled_confusion else None,
                "metrics": self.pooled_metrics.to_dict(),
            },
            "mean_metrics": dict(self.mean_metrics),
            "sd_metrics": dict(self.sd_metrics),
            "warnings": list(self.warnings),
        }


def _predict(classifier: tuple, train: LabeledDataset, x_test: np.ndarray) -> np.ndarray:
    name, params = classifier
    if name == "knn":
        k = min(int(params.get("k", 5)), train.n_samples)
        return knn_classify(train, x_test, max(k, 1))
    if name == "tree":
        model = train_tree(train, max_depth=params.get("max_depth"),
                           min_leaf=int(params.get("min_leaf", 1)))
        return tree_classify(model, x_test)
    raise ValidationError(f"unknown classifier {name!r}")


def cross_validate(data: LabeledDataset, selector, classifier: tuple,
                   folds: FoldAssignment, positive_class: int = 1) -> EvaluationReport:
    """Evaluate a feature selection under k-fold cross-validation.

    ``selector`` is either None (use all features), a sequence of feature
    indices (a fixed subset), or a callable ``(x_train, y_train) -> indices``
    re-run inside each training fold so no information from the held-out fold
    can leak into the selection.
    """
    binary = data.class_count == 2
    per_fold = []
    pooled = ConfusionCounts(0, 0, 0, 0) if binary else None
    all_pred = np.full(data.n_samples, -1, dtype=np.int64)
    warnings = []
    for fold in range(folds.n_folds):
        train_idx = folds.train_indices(fold)
        test_idx = folds.test_indices(fold)
        if test_idx.size == 0:
            test_idx = train_idx  # degenerate single-fold mode scores on train
        x_tr, y_tr = data.x[train_idx], data.y[train_idx]
        if selector is None:
            feats = np.arange(data.n_features)
        elif callable(selector):
            feats = np.asarray(list(selector(x_tr, y_tr)), dtype=np.int64)
        else:
            feats = np.asarray(list(selector), dtype=np.int64)
        if feats.size == 0:
            raise ValidationError("selector produced an empty feature set")
        train = LabeledDataset(x=x_tr[:, feats], y=y_tr, class_count=data.class_count)
        pred = _predict(classifier, train, data.x[test_idx][:, feats])
        all_pred[test_idx] = pred
        truth = data.y[test_idx]
        if binary:
            cc = confusion(pred, truth, positive_class)
            mv = metrics(cc)
            pooled = ConfusionCounts(tp=pooled.tp + cc.tp, tn=pooled.tn + cc.tn,
                                     fp=pooled.fp + cc.fp, fn=pooled.fn + cc.fn)
        else:
            cc = None
            mv = macro_metrics(pred, truth, data.class_count)
        per_fold.append((cc, mv))
        for name in METRIC_NAMES:
            if getattr(mv, name) is None and f"undefined:{name}" not in warnings:
                warnings.append(f"undefined:{name}")
    if binary:
        pooled_mv = metrics(pooled)
    else:
        scored = all_pred >= 0
        pooled_mv = macro_metrics(all_pred[scored], data.y[scored], data.class_count)
    mean_metrics, sd_metrics = {}, {}
    for name in METRIC_NAMES:
        defined = [getattr(mv, name) for _, mv in per_fold if getattr(mv, name) is not None]
        if defined:
            mean_metrics[name] = float(np.mean(defined))
            sd_metrics[name] = float(np.std(defined))
    return EvaluationReport(n_folds=folds.n_folds, classifier=classifier,
                            positive_class=positive_class, per_fold=tuple(per_fold),
                            pooled_confusion=pooled, pooled_metrics=pooled_mv,
                            mean_metrics=mean_metrics, sd_metrics=sd_metrics,
                            warnings=tuple(warnings))
