"""Pure NumPy CART kernel.

Mirrors ``_tree_ext.pyx`` step for step: same node numbering, same splitmix64
draws, same floating-point expressions for split scores, so both backends grow
bit-identical trees from the same inputs.
"""
import numpy as np

MASK64 = (1 << 64) - 1


class SplitMix64:
    __slots__ = ("state",)

    def __init__(self, seed):
        self.state = int(seed) & MASK64

    def next(self):
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def bounded(self, n):
        return self.next() % n


def tree_seed(seed, index):
    rng = SplitMix64((int(seed) + index * 0xD1B54A32D192ED03) & MASK64)
    return rng.next()


def _best_split(X, y, samples, feature, n_classes, total):
    vals = X[samples, feature]
    order = np.argsort(vals, kind="stable")
    v = vals[order]
    n = v.shape[0]
    if not v[0] < v[-1]:
        return None
    onehot = np.zeros((n, n_classes), dtype=np.int64)
    onehot[np.arange(n), y[samples][order]] = 1
    left = np.cumsum(onehot, axis=0)[:-1]
    right = total[None, :] - left
    n_left = np.arange(1, n, dtype=np.int64)
    n_right = n - n_left
    sq_left = (left * left).sum(axis=1)
    sq_right = (right * right).sum(axis=1)
    scores = sq_left / n_left + sq_right / n_right
    valid = v[:-1] < v[1:]
    scores = np.where(valid, scores, -np.inf)
    i = int(np.argmax(scores))
    lo, hi = float(v[i]), float(v[i + 1])
    threshold = (lo + hi) / 2.0
    if threshold == hi:
        threshold = lo
    return float(scores[i]), threshold


def build_tree(X, y, samples, n_classes, max_features, min_samples_split, max_depth, seed):
    """Grow one tree over ``samples`` (row indices, repeats allowed).

    Returns ``(feature, threshold, left, right, value)`` arrays; leaves have
    ``feature == -1`` and ``value`` holds the leaf class.
    """
    return _grow(X, y, samples, n_classes, max_features, min_samples_split,
                 max_depth, SplitMix64(seed))


def _grow(X, y, samples, n_classes, max_features, min_samples_split, max_depth, rng):
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.intp)
    n_features = X.shape[1]

    feature, threshold, left, right, value = [], [], [], [], []

    def new_node():
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(0)
        return len(feature) - 1

    root = new_node()
    stack = [(root, np.asarray(samples, dtype=np.intp), 0)]
    while stack:
        node, idx, depth = stack.pop()
        total = np.bincount(y[idx], minlength=n_classes).astype(np.int64)
        value[node] = int(np.argmax(total))
        n_node = idx.shape[0]
        if (
            np.count_nonzero(total) <= 1
            or n_node < min_samples_split
            or (max_depth >= 0 and depth >= max_depth)
        ):
            continue

        order = list(range(n_features))
        best = None
        visited = 0
        for i in range(n_features):
            j = i + rng.bounded(n_features - i)
            order[i], order[j] = order[j], order[i]
            f = order[i]
            found = _best_split(X, y, idx, f, n_classes, total)
            if found is None:
                continue
            if best is None or found[0] > best[0]:
                best = (found[0], f, found[1])
            visited += 1
            if visited >= max_features:
                break
        if best is None:
            continue

        _, f, thr = best
        go_left = X[idx, f] <= thr
        feature[node] = f
        threshold[node] = thr
        left[node] = new_node()
        right[node] = new_node()
        stack.append((right[node], idx[~go_left], depth + 1))
        stack.append((left[node], idx[go_left], depth + 1))

    return (
        np.asarray(feature, dtype=np.intp),
        np.asarray(threshold, dtype=np.float64),
        np.asarray(left, dtype=np.intp),
        np.asarray(right, dtype=np.intp),
        np.asarray(value, dtype=np.intp),
    )


def predict_tree(X, feature, threshold, left, right, value):
    X = np.asarray(X, dtype=np.float64)
    node = np.zeros(X.shape[0], dtype=np.intp)
    rows = np.arange(X.shape[0])
    active = feature[node] >= 0
    while active.any():
        r = rows[active]
        n = node[r]
        go_left = X[r, feature[n]] <= threshold[n]
        node[r] = np.where(go_left, left[n], right[n])
        active = feature[node] >= 0
    return value[node]


def build_forest(X, y, n_classes, first_tree, n_trees, max_features,
                 min_samples_split, max_depth, seed):
    X = np.ascontiguousarray(X, dtype=np.float64)
    n = X.shape[0]
    parts = []
    offsets = [0]
    for ti in range(n_trees):
        rng = SplitMix64(tree_seed(seed, first_tree + ti))
        samples = np.fromiter((rng.bounded(n) for _ in range(n)), dtype=np.intp, count=n)
        tree = _grow(X, y, samples, n_classes, max_features, min_samples_split, max_depth, rng)
        parts.append(tree)
        offsets.append(offsets[-1] + len(tree[0]))
    cat = [np.concatenate([p[i] for p in parts]) if parts else np.empty(0, dtype=np.intp)
           for i in range(5)]
    cat[1] = cat[1].astype(np.float64)
    return (*cat, np.asarray(offsets, dtype=np.intp))


def forest_votes(X, feature, threshold, left, right, value, offsets, n_classes):
    X = np.asarray(X, dtype=np.float64)
    votes = np.zeros((X.shape[0], n_classes), dtype=np.int64)
    rows = np.arange(X.shape[0])
    for t in range(len(offsets) - 1):
        sl = slice(offsets[t], offsets[t + 1])
        pred = predict_tree(X, feature[sl], threshold[sl], left[sl], right[sl], value[sl])
        votes[rows, pred] += 1
    return votes
