"""Random-forest classifier built on a CART kernel.

The kernel comes from the compiled ``_tree_ext`` module when it imports and
from ``_tree_py`` otherwise. Set ``WILTSCAN_BACKEND=python`` to force the
NumPy kernel; both produce identical trees.
"""
import math
import os
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import asdict, dataclass
from typing import NamedTuple, Optional, Union

import numpy as np

from . import _tree_py
from ._seeding import derive_seed
from .errors import DataError, DegenerateInputError, ShapeError

try:
    from . import _tree_ext
except ImportError:  # pragma: no cover - depends on build environment
    _tree_ext = None

_KERNELS = {"python": _tree_py}
if _tree_ext is not None:
    _KERNELS["cython"] = _tree_ext


def _initial_backend():
    wanted = os.environ.get("WILTSCAN_BACKEND", "auto").lower()
    if wanted == "auto":
        return "cython" if "cython" in _KERNELS else "python"
    if wanted not in _KERNELS:
        raise ImportError(f"backend {wanted!r} unavailable; have {sorted(_KERNELS)}")
    return wanted


_backend = _initial_backend()


def available_backends():
    return sorted(_KERNELS)


def get_backend():
    return _backend


def set_backend(name):
    global _backend
    if name not in _KERNELS:
        raise ValueError(f"backend {name!r} unavailable; have {sorted(_KERNELS)}")
    _backend = name


@contextmanager
def use_backend(name):
    previous = _backend
    set_backend(name)
    try:
        yield
    finally:
        set_backend(previous)


@dataclass(frozen=True)
class ForestConfig:
    n_estimators: int = 100
    max_features: Union[str, int, float, None] = "sqrt"
    min_samples_split: int = 2
    max_depth: Optional[int] = None
    seed: int = 0
    n_jobs: int = 1

    def __post_init__(self):
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be >= 1")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")

    def resolve_max_features(self, n_features):
        rule = self.max_features
        if rule is None:
            return n_features
        if rule == "sqrt":
            return max(1, math.isqrt(n_features))
        if rule == "log2":
            return max(1, int(math.log2(n_features)))
        if isinstance(rule, float):
            return max(1, min(n_features, int(rule * n_features)))
        return max(1, min(n_features, int(rule)))

    def to_dict(self):
        # n_jobs never changes the model, so reports leave it out
        d = asdict(self)
        del d["n_jobs"]
        return d


class Tree(NamedTuple):
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self):
        return len(self.feature)


@dataclass
class ForestModel:
    """Trees stored as flat node arrays; tree ``t`` spans ``offsets[t]:offsets[t+1]``."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    offsets: np.ndarray
    classes: np.ndarray
    n_features: int
    config: Optional[ForestConfig] = None

    @classmethod
    def from_trees(cls, trees, classes, n_features, config=None):
        parts = [np.concatenate([np.asarray(t[i]) for t in trees]) for i in range(5)]
        offsets = np.concatenate([[0], np.cumsum([len(t[0]) for t in trees])])
        return cls(
            parts[0].astype(np.intp), parts[1].astype(np.float64), parts[2].astype(np.intp),
            parts[3].astype(np.intp), parts[4].astype(np.intp), offsets.astype(np.intp),
            np.asarray(classes), n_features, config,
        )

    @property
    def n_trees(self):
        return len(self.offsets) - 1

    @property
    def trees(self):
        out = []
        for t in range(self.n_trees):
            sl = slice(self.offsets[t], self.offsets[t + 1])
            out.append(Tree(self.feature[sl], self.threshold[sl], self.left[sl],
                            self.right[sl], self.value[sl]))
        return out


def _as_2d(features):
    values = getattr(features, "values", features)
    X = np.asarray(values, dtype=np.float64)
    if X.ndim != 2:
        raise ShapeError(f"feature matrix must be 2-D, got shape {X.shape}")
    return np.ascontiguousarray(X)


def _chunks(total, parts):
    step = -(-total // parts)
    return [(s, min(step, total - s)) for s in range(0, total, step)]


def train_random_forest(features, labels, config=ForestConfig()):
    """Fit ``config.n_estimators`` Gini CART trees on bootstrap samples.

    Tree ``i`` draws from its own stream keyed by (seed, i), so chunking the
    work across ``config.n_jobs`` threads leaves the forest unchanged.
    """
    X = _as_2d(features)
    if not np.isfinite(X).all():
        raise DataError("feature matrix contains non-finite values")
    labels = np.asarray(labels)
    if labels.shape[0] != X.shape[0]:
        raise ShapeError(f"{X.shape[0]} rows but {labels.shape[0]} labels")
    classes, y = np.unique(labels, return_inverse=True)
    if len(classes) < 2:
        raise DegenerateInputError("training labels contain a single class")
    y = np.ascontiguousarray(y, dtype=np.intp)
    kernel = _KERNELS[_backend]
    max_features = config.resolve_max_features(X.shape[1])
    seed = derive_seed(config.seed, "forest")
    max_depth = -1 if config.max_depth is None else config.max_depth

    def grow(chunk):
        first, count = chunk
        return kernel.build_forest(X, y, len(classes), first, count, max_features,
                                   config.min_samples_split, max_depth, seed)

    chunks = _chunks(config.n_estimators, max(1, config.n_jobs))
    if len(chunks) > 1:
        with ThreadPoolExecutor(len(chunks)) as pool:
            parts = list(pool.map(grow, chunks))
    else:
        parts = [grow(chunks[0])]

    arrays = [np.concatenate([p[i] for p in parts]) for i in range(5)]
    offsets = [0]
    for p in parts:
        offsets.extend((offsets[-1] + p[5][1:]).tolist())
    return ForestModel(*arrays, np.asarray(offsets, dtype=np.intp), classes, X.shape[1], config)


def predict_votes(model, features):
    X = _as_2d(features)
    if X.shape[1] != model.n_features:
        raise ShapeError(f"model expects {model.n_features} features, got {X.shape[1]}")
    kernel = _KERNELS[_backend]
    return kernel.forest_votes(X, model.feature, model.threshold, model.left, model.right,
                               model.value, model.offsets, len(model.classes))


def predict(model, features):
    """Majority vote over trees; ties go to the lowest class."""
    votes = predict_votes(model, features)
    return model.classes[np.argmax(votes, axis=1)]
