"""Label schemes, class balancing, cross-validation, accuracy and PCA."""
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import List, Optional

import numpy as np

from ._seeding import derive_rng, derive_seed
from .errors import (
    ConfigError,
    DegenerateClassError,
    DegenerateVarianceError,
    EmptyInputError,
    RangeError,
    ShapeError,
    StratificationError,
)
from .features import FeatureMatrix
from .forest import ForestConfig, predict, train_random_forest


class LabelScheme(str, Enum):
    RAW = "raw"
    THREE_CLASS = "three"
    TWO_CLASS = "two"


_GROUPINGS = {
    LabelScheme.RAW: {s: s - 1 for s in range(1, 7)},
    LabelScheme.THREE_CLASS: {1: 0, 2: 0, 3: 1, 4: 2, 5: 2, 6: 2},
    LabelScheme.TWO_CLASS: {1: 0, 2: 0, 3: 1, 4: 1, 5: 1, 6: 1},
}

CLASS_NAMES = {
    LabelScheme.THREE_CLASS: ["tolerant", "moderately susceptible", "susceptible"],
    LabelScheme.TWO_CLASS: ["select", "discard"],
}


def regroup_labels(raw, scheme):
    """Map 1-6 wilt scores onto class indices of ``scheme``."""
    mapping = _GROUPINGS[LabelScheme(scheme)]
    out = []
    for score in raw:
        s = int(score)
        if s != score or s not in mapping:
            raise RangeError(f"wilt score {score!r} outside 1-6")
        out.append(mapping[s])
    return np.asarray(out, dtype=np.intp)


def _unpack(features, labels):
    if isinstance(features, FeatureMatrix):
        if labels is None:
            labels = features.labels
        return features, labels
    X = np.asarray(features, dtype=np.float64)
    names = [f"f{i}" for i in range(X.shape[1])]
    return FeatureMatrix(X, names), labels


def balance_classes(features, labels=None, seed=0, classes=None):
    """Downsample every class, without replacement, to the rarest class's count.

    Kept rows stay in their original order. ``classes`` names the classes that
    must be present; by default those seen in ``labels``.
    """
    fm, labels = _unpack(features, labels)
    labels = np.asarray(labels)
    if labels.shape[0] != fm.n_rows:
        raise ShapeError("label vector length differs from row count")
    present = np.unique(labels)
    classes = present if classes is None else np.asarray(sorted(classes))
    counts = {c: int(np.sum(labels == c)) for c in classes.tolist()}
    if len(classes) < 2:
        raise DegenerateClassError("balancing needs at least two classes")
    empty = [c for c, n in counts.items() if n == 0]
    if empty:
        raise DegenerateClassError(f"classes with zero samples: {empty}")
    m = min(counts.values())
    rng = derive_rng(seed, "balance")
    keep = []
    for c in classes.tolist():
        idx = np.flatnonzero(labels == c)
        keep.append(rng.choice(idx, size=m, replace=False))
    keep = np.sort(np.concatenate(keep))
    return fm.rows(keep).with_labels(labels[keep])


def accuracy(predicted, truth):
    """Correctly classified samples over total samples."""
    predicted = np.asarray(predicted)
    truth = np.asarray(truth)
    if predicted.shape != truth.shape:
        raise ShapeError(f"length mismatch {predicted.shape} vs {truth.shape}")
    if truth.size == 0:
        raise EmptyInputError("accuracy of an empty prediction set")
    return int(np.sum(predicted == truth)) / truth.size


def confusion_matrix(predicted, truth, classes):
    index = {c: i for i, c in enumerate(np.asarray(classes).tolist())}
    out = np.zeros((len(index), len(index)), dtype=np.int64)
    for p, t in zip(np.asarray(predicted).tolist(), np.asarray(truth).tolist()):
        out[index[t], index[p]] += 1
    return out


def make_folds(labels, k, seed, stratified=True):
    """Assign each row a fold id in ``0..k-1``.

    Stratified mode shuffles each class and deals it round-robin, continuing
    the rotation across classes so fold sizes differ by at most one.
    """
    labels = np.asarray(labels)
    n = labels.shape[0]
    if k < 2:
        raise ConfigError("fold count must be >= 2")
    rng = derive_rng(seed, "folds")
    folds = np.empty(n, dtype=np.intp)
    if not stratified:
        if n < k:
            raise StratificationError(f"{n} rows cannot fill {k} folds")
        perm = rng.permutation(n)
        folds[perm] = np.arange(n) % k
        return folds
    offset = 0
    for c in np.unique(labels).tolist():
        idx = np.flatnonzero(labels == c)
        if len(idx) < k:
            raise StratificationError(f"class {c} has {len(idx)} samples, fewer than {k} folds")
        idx = rng.permutation(idx)
        folds[idx] = (offset + np.arange(len(idx))) % k
        offset = (offset + len(idx)) % k
    return folds


@dataclass
class EvalReport:
    fold_accuracies: List[float]
    mean_accuracy: float
    std_dev: float
    confusion: List[List[int]]
    classes: List
    feature_names: List[str]
    k: int
    stratified: bool
    forest: dict
    seed: int
    pca_variance: Optional[float] = None
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "fold_accuracies": self.fold_accuracies,
            "mean_accuracy": self.mean_accuracy,
            "std_dev": self.std_dev,
            "confusion": self.confusion,
            "classes": self.classes,
            "feature_names": self.feature_names,
            "k": self.k,
            "fold_mode": "stratified" if self.stratified else "random",
            "forest": self.forest,
            "seed": self.seed,
            "pca_variance": self.pca_variance,
            **self.extra,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _fit_fold(X, labels, folds, fold, config, pca_variance):
    train = folds != fold
    test = ~train
    Xtr, Xte = X[train], X[test]
    if pca_variance is not None:
        reduced, basis = pca_reduce(Xtr, pca_variance)
        Xtr, Xte = reduced.values, basis.transform(Xte)
    fold_config = replace(config, seed=derive_seed(config.seed, "fold", fold))
    model = train_random_forest(Xtr, labels[train], fold_config)
    return predict(model, Xte), labels[test]


def cross_validate(features, labels=None, k=5, config=ForestConfig(), stratified=True,
                   folds=None, pca_variance=None, n_jobs=1):
    """k-fold cross-validated random-forest accuracy.

    Pass ``folds`` (from :func:`make_folds`) to pair evaluations of different
    column subsets on the same partition. With ``pca_variance`` set, PCA is fit
    on each training fold and applied to its test fold.
    """
    fm, labels = _unpack(features, labels)
    labels = np.asarray(labels)
    X = fm.values
    if folds is None:
        folds = make_folds(labels, k, config.seed, stratified)
    else:
        folds = np.asarray(folds, dtype=np.intp)
        k = int(folds.max()) + 1
    classes = np.unique(labels)

    def run(fold):
        return _fit_fold(X, labels, folds, fold, config, pca_variance)

    if n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            results = list(pool.map(run, range(k)))
    else:
        results = [run(f) for f in range(k)]

    accs = [accuracy(p, t) for p, t in results]
    conf = sum(confusion_matrix(p, t, classes) for p, t in results)
    return EvalReport(
        fold_accuracies=accs,
        mean_accuracy=float(np.mean(accs)),
        std_dev=float(np.std(accs, ddof=1)),
        confusion=conf.tolist(),
        classes=classes.tolist(),
        feature_names=list(fm.names),
        k=k,
        stratified=stratified,
        forest=config.to_dict(),
        seed=config.seed,
        pca_variance=pca_variance,
    )


@dataclass
class PcaBasis:
    mean: np.ndarray
    components: np.ndarray
    explained_variance_ratio: np.ndarray
    n_retained: int

    def transform(self, X):
        X = np.asarray(getattr(X, "values", X), dtype=np.float64)
        return (X - self.mean) @ self.components[: self.n_retained].T

    def inverse_transform(self, Z):
        return np.asarray(Z) @ self.components[: self.n_retained] + self.mean


def pca_reduce(features, variance_target=0.9):
    """Project onto the fewest principal components reaching ``variance_target``."""
    fm, labels = _unpack(features, None)
    X = fm.values
    if X.shape[0] < 2:
        raise ShapeError("PCA needs at least two rows")
    if not 0 < variance_target <= 1:
        raise ConfigError("variance_target must lie in (0, 1]")
    mean = X.mean(axis=0)
    centered = X - mean
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    var = s**2
    total = var.sum()
    if total <= 0 or not np.isfinite(total):
        raise DegenerateVarianceError("feature matrix has zero variance")
    ratios = var / total
    # deterministic signs: largest-magnitude loading positive
    signs = np.sign(vt[np.arange(len(vt)), np.argmax(np.abs(vt), axis=1)])
    vt = vt * np.where(signs == 0, 1, signs)[:, None]
    cumulative = np.cumsum(ratios)
    m = int(np.searchsorted(cumulative, variance_target - 1e-12)) + 1
    m = min(m, len(ratios))
    basis = PcaBasis(mean, vt, ratios, m)
    reduced = FeatureMatrix(
        basis.transform(X), [f"PC{i + 1}" for i in range(m)], labels, fm.row_ids
    )
    return reduced, basis


def center_crop_or_pad(image, size):
    """Center-crop or zero-pad a 2-D array to ``size`` (rows, cols)."""
    image = np.asarray(image)
    out = np.zeros(size, dtype=image.dtype)
    src_slices, dst_slices = [], []
    for have, want in zip(image.shape, size):
        if have >= want:
            start = (have - want) // 2
            src_slices.append(slice(start, start + want))
            dst_slices.append(slice(0, want))
        else:
            start = (want - have) // 2
            src_slices.append(slice(0, have))
            dst_slices.append(slice(start, start + have))
    out[tuple(dst_slices)] = image[tuple(src_slices)]
    return out


def flatten_plot_pixels(bands, size):
    """Stack per-band pixels, cropped or padded to a common ``size``, into one vector."""
    return np.concatenate([center_crop_or_pad(b, size).ravel() for b in bands])
