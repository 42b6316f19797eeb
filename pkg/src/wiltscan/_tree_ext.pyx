# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled CART kernel; the NumPy twin lives in ``_tree_py.py``."""
import numpy as np
cimport numpy as cnp
from libc.stdlib cimport malloc, realloc, free
from libc.string cimport memset
from libc.stdint cimport uint64_t, int64_t

cnp.import_array()

ctypedef cnp.npy_intp intp


cdef inline uint64_t splitmix_next(uint64_t* state) noexcept nogil:
    cdef uint64_t z
    state[0] += <uint64_t>0x9E3779B97F4A7C15
    z = state[0]
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EB
    return z ^ (z >> 31)


cdef inline void swap_pair(double* v, intp* c, intp i, intp j) noexcept nogil:
    cdef double tv = v[i]
    cdef intp tc = c[i]
    v[i] = v[j]
    c[i] = c[j]
    v[j] = tv
    c[j] = tc


cdef void sort_pairs(double* v, intp* c, intp n) noexcept nogil:
    # quicksort, median of three, insertion sort below 16 elements
    cdef intp i, j, lo, mid, hi
    cdef double pivot, tv
    cdef intp tc
    while n > 16:
        lo = 0
        mid = n // 2
        hi = n - 1
        if v[mid] < v[lo]:
            swap_pair(v, c, mid, lo)
        if v[hi] < v[lo]:
            swap_pair(v, c, hi, lo)
        if v[hi] < v[mid]:
            swap_pair(v, c, hi, mid)
        pivot = v[mid]
        i = 0
        j = n - 1
        while i <= j:
            while v[i] < pivot:
                i += 1
            while v[j] > pivot:
                j -= 1
            if i <= j:
                swap_pair(v, c, i, j)
                i += 1
                j -= 1
        if j + 1 < n - i:
            sort_pairs(v, c, j + 1)
            v += i
            c += i
            n -= i
        else:
            sort_pairs(v + i, c + i, n - i)
            n = j + 1
    for i in range(1, n):
        tv = v[i]
        tc = c[i]
        j = i - 1
        while j >= 0 and v[j] > tv:
            v[j + 1] = v[j]
            c[j + 1] = c[j]
            j -= 1
        v[j + 1] = tv
        c[j + 1] = tc


cdef struct Frame:
    intp node
    intp start
    intp end
    intp depth


cdef struct Nodes:
    intp* feature
    double* threshold
    intp* left
    intp* right
    intp* value
    intp count
    intp capacity


cdef int nodes_grow(Nodes* t) noexcept nogil:
    cdef intp cap = t.capacity * 2 if t.capacity > 0 else 64
    cdef void* p
    p = realloc(t.feature, cap * sizeof(intp))
    if p == NULL:
        return -1
    t.feature = <intp*>p
    p = realloc(t.threshold, cap * sizeof(double))
    if p == NULL:
        return -1
    t.threshold = <double*>p
    p = realloc(t.left, cap * sizeof(intp))
    if p == NULL:
        return -1
    t.left = <intp*>p
    p = realloc(t.right, cap * sizeof(intp))
    if p == NULL:
        return -1
    t.right = <intp*>p
    p = realloc(t.value, cap * sizeof(intp))
    if p == NULL:
        return -1
    t.value = <intp*>p
    t.capacity = cap
    return 0


cdef intp new_node(Nodes* t) noexcept nogil:
    if t.count == t.capacity:
        if nodes_grow(t) != 0:
            return -1
    t.feature[t.count] = -1
    t.threshold[t.count] = 0.0
    t.left[t.count] = -1
    t.right[t.count] = -1
    t.value[t.count] = 0
    t.count += 1
    return t.count - 1


cdef struct Work:
    intp* order
    double* vals
    intp* cls
    int64_t* total
    int64_t* cl
    int64_t* cr
    Frame* stack


cdef int grow(const double[:, ::1] X, const intp[::1] y, intp* samples, intp n_samples,
              intp n_classes, intp max_features, intp min_samples_split,
              intp max_depth, uint64_t seed, Nodes* t) noexcept nogil:
    cdef Work w
    cdef intp n_features = X.shape[1]
    cdef int status
    w.order = <intp*>malloc(n_features * sizeof(intp))
    w.vals = <double*>malloc(n_samples * sizeof(double))
    w.cls = <intp*>malloc(n_samples * sizeof(intp))
    w.total = <int64_t*>malloc(n_classes * sizeof(int64_t))
    w.cl = <int64_t*>malloc(n_classes * sizeof(int64_t))
    w.cr = <int64_t*>malloc(n_classes * sizeof(int64_t))
    w.stack = <Frame*>malloc((n_samples + 2) * sizeof(Frame))
    if (w.order == NULL or w.vals == NULL or w.cls == NULL or w.total == NULL
            or w.cl == NULL or w.cr == NULL or w.stack == NULL):
        status = -1
    else:
        status = grow_inner(X, y, samples, n_samples, n_classes, max_features,
                            min_samples_split, max_depth, seed, t, &w)
    free(w.order)
    free(w.vals)
    free(w.cls)
    free(w.total)
    free(w.cl)
    free(w.cr)
    free(w.stack)
    return status


cdef int grow_inner(const double[:, ::1] X, const intp[::1] y, intp* samples, intp n_samples,
                    intp n_classes, intp max_features, intp min_samples_split,
                    intp max_depth, uint64_t seed, Nodes* t, Work* w) noexcept nogil:
    cdef intp n_features = X.shape[1]
    cdef uint64_t state = seed
    cdef intp* order = w.order
    cdef double* vals = w.vals
    cdef intp* cls = w.cls
    cdef int64_t* total = w.total
    cdef int64_t* cl = w.cl
    cdef int64_t* cr = w.cr
    cdef Frame* stack = w.stack
    cdef intp top = 0
    cdef Frame fr
    cdef intp i, j, k, f, tmp, n, nz, best_f, visited, node, lo_i, hi_i, c, root
    cdef int64_t sq_l, sq_r, best_count
    cdef double score, best_score, best_thr, thr

    root = new_node(t)
    if root < 0:
        return -1
    stack[0].node = root
    stack[0].start = 0
    stack[0].end = n_samples
    stack[0].depth = 0
    top = 1

    while top > 0:
        top -= 1
        fr = stack[top]
        node = fr.node
        n = fr.end - fr.start

        memset(total, 0, n_classes * sizeof(int64_t))
        for i in range(fr.start, fr.end):
            total[y[samples[i]]] += 1
        nz = 0
        best_count = -1
        for c in range(n_classes):
            if total[c] > 0:
                nz += 1
            if total[c] > best_count:
                best_count = total[c]
                t.value[node] = c
        if nz <= 1 or n < min_samples_split or (max_depth >= 0 and fr.depth >= max_depth):
            continue

        for i in range(n_features):
            order[i] = i
        best_f = -1
        best_score = -1.0
        best_thr = 0.0
        visited = 0
        for i in range(n_features):
            j = i + <intp>(splitmix_next(&state) % <uint64_t>(n_features - i))
            tmp = order[i]
            order[i] = order[j]
            order[j] = tmp
            f = order[i]

            for k in range(n):
                vals[k] = X[samples[fr.start + k], f]
                cls[k] = y[samples[fr.start + k]]
            sort_pairs(vals, cls, n)
            if not vals[0] < vals[n - 1]:
                continue

            memset(cl, 0, n_classes * sizeof(int64_t))
            sq_l = 0
            sq_r = 0
            for c in range(n_classes):
                cr[c] = total[c]
                sq_r += total[c] * total[c]
            for k in range(n - 1):
                c = cls[k]
                sq_l += 2 * cl[c] + 1
                cl[c] += 1
                sq_r -= 2 * cr[c] - 1
                cr[c] -= 1
                if vals[k] < vals[k + 1]:
                    score = <double>sq_l / <double>(k + 1) + <double>sq_r / <double>(n - k - 1)
                    if score > best_score:
                        best_score = score
                        best_f = f
                        thr = (vals[k] + vals[k + 1]) / 2.0
                        if thr == vals[k + 1]:
                            thr = vals[k]
                        best_thr = thr
            visited += 1
            if visited >= max_features:
                break

        if best_f < 0:
            continue

        # partition samples[start:end] so that X <= thr comes first
        lo_i = fr.start
        hi_i = fr.end - 1
        while lo_i <= hi_i:
            if X[samples[lo_i], best_f] <= best_thr:
                lo_i += 1
            else:
                tmp = samples[lo_i]
                samples[lo_i] = samples[hi_i]
                samples[hi_i] = tmp
                hi_i -= 1

        t.feature[node] = best_f
        t.threshold[node] = best_thr
        i = new_node(t)
        j = new_node(t)
        if i < 0 or j < 0:
            return -1
        t.left[node] = i
        t.right[node] = j
        stack[top].node = j
        stack[top].start = lo_i
        stack[top].end = fr.end
        stack[top].depth = fr.depth + 1
        top += 1
        stack[top].node = i
        stack[top].start = fr.start
        stack[top].end = lo_i
        stack[top].depth = fr.depth + 1
        top += 1

    return 0


cdef inline uint64_t tree_seed(uint64_t seed, intp index) noexcept nogil:
    cdef uint64_t s = seed + <uint64_t>index * <uint64_t>0xD1B54A32D192ED03
    return splitmix_next(&s)


cdef int bootstrap(uint64_t* state, intp* out, intp n) noexcept nogil:
    cdef intp i
    for i in range(n):
        out[i] = <intp>(splitmix_next(state) % <uint64_t>n)
    return 0


def build_forest(X, y, intp n_classes, intp first_tree, intp n_trees, intp max_features,
                 intp min_samples_split, intp max_depth, seed):
    """Grow trees ``first_tree .. first_tree + n_trees - 1`` of a forest.

    Each tree draws its bootstrap sample and feature permutations from its own
    splitmix64 stream keyed by (seed, tree index). Returns flat node arrays and
    ``offsets`` with tree ``t`` occupying ``offsets[t]:offsets[t + 1]``; child
    indices are local to their tree.
    """
    cdef const double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef const intp[::1] yv = np.ascontiguousarray(y, dtype=np.intp)
    cdef intp n = Xv.shape[0]
    cdef uint64_t s = <uint64_t>(int(seed) & 0xFFFFFFFFFFFFFFFF)
    cdef uint64_t state
    cdef intp* samples = <intp*>malloc(max(n, 1) * sizeof(intp))
    cdef Nodes t
    cdef int status = 0
    cdef intp ti, i, total, base
    cdef intp[::1] fv, lv, rv, vv, ov
    cdef double[::1] tv
    t.feature = NULL
    t.threshold = NULL
    t.left = NULL
    t.right = NULL
    t.value = NULL
    t.count = 0
    t.capacity = 0
    offsets = np.zeros(n_trees + 1, dtype=np.intp)
    ov = offsets
    if samples == NULL:
        raise MemoryError("sample buffer allocation failed")
    try:
        with nogil:
            for ti in range(n_trees):
                state = tree_seed(s, first_tree + ti)
                bootstrap(&state, samples, n)
                base = t.count
                status = grow(Xv, yv, samples, n, n_classes, max_features,
                              min_samples_split, max_depth, state, &t)
                if status != 0:
                    break
                for i in range(base, t.count):
                    if t.left[i] >= 0:
                        t.left[i] -= base
                        t.right[i] -= base
                ov[ti + 1] = t.count
        if status != 0:
            raise MemoryError("tree allocation failed")
        total = t.count
        feature = np.empty(total, dtype=np.intp)
        threshold = np.empty(total, dtype=np.float64)
        left = np.empty(total, dtype=np.intp)
        right = np.empty(total, dtype=np.intp)
        value = np.empty(total, dtype=np.intp)
        fv = feature
        tv = threshold
        lv = left
        rv = right
        vv = value
        for i in range(total):
            fv[i] = t.feature[i]
            tv[i] = t.threshold[i]
            lv[i] = t.left[i]
            rv[i] = t.right[i]
            vv[i] = t.value[i]
        return feature, threshold, left, right, value, offsets
    finally:
        free(samples)
        free(t.feature)
        free(t.threshold)
        free(t.left)
        free(t.right)
        free(t.value)


def forest_votes(X, const intp[::1] feature, const double[::1] threshold,
                 const intp[::1] left, const intp[::1] right, const intp[::1] value,
                 const intp[::1] offsets, intp n_classes):
    cdef const double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef intp n = Xv.shape[0]
    cdef intp n_trees = offsets.shape[0] - 1
    votes = np.zeros((n, n_classes), dtype=np.int64)
    cdef int64_t[:, ::1] vv = votes
    cdef intp i, ti, base, node
    with nogil:
        for ti in range(n_trees):
            base = offsets[ti]
            for i in range(n):
                node = 0
                while feature[base + node] >= 0:
                    if Xv[i, feature[base + node]] <= threshold[base + node]:
                        node = left[base + node]
                    else:
                        node = right[base + node]
                vv[i, value[base + node]] += 1
    return votes


def build_tree(X, y, samples, intp n_classes, intp max_features,
               intp min_samples_split, intp max_depth, seed):
    cdef const double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef const intp[::1] yv = np.ascontiguousarray(y, dtype=np.intp)
    cdef intp[::1] sv = np.array(samples, dtype=np.intp, copy=True)
    cdef intp n_samples = sv.shape[0]
    cdef uint64_t s = <uint64_t>(int(seed) & 0xFFFFFFFFFFFFFFFF)
    cdef Nodes t
    cdef int status
    cdef intp i, n
    cdef intp[::1] fv, lv, rv, vv
    cdef double[::1] tv
    t.feature = NULL
    t.threshold = NULL
    t.left = NULL
    t.right = NULL
    t.value = NULL
    t.count = 0
    t.capacity = 0
    try:
        with nogil:
            status = grow(Xv, yv, &sv[0], n_samples, n_classes, max_features,
                          min_samples_split, max_depth, s, &t)
        if status != 0:
            raise MemoryError("tree allocation failed")
        n = t.count
        feature = np.empty(n, dtype=np.intp)
        threshold = np.empty(n, dtype=np.float64)
        left = np.empty(n, dtype=np.intp)
        right = np.empty(n, dtype=np.intp)
        value = np.empty(n, dtype=np.intp)
        fv = feature
        tv = threshold
        lv = left
        rv = right
        vv = value
        for i in range(n):
            fv[i] = t.feature[i]
            tv[i] = t.threshold[i]
            lv[i] = t.left[i]
            rv[i] = t.right[i]
            vv[i] = t.value[i]
        return feature, threshold, left, right, value
    finally:
        free(t.feature)
        free(t.threshold)
        free(t.left)
        free(t.right)
        free(t.value)


def predict_tree(X, const intp[::1] feature, const double[::1] threshold,
                 const intp[::1] left, const intp[::1] right, const intp[::1] value):
    cdef const double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef intp n = Xv.shape[0]
    out = np.empty(n, dtype=np.intp)
    cdef intp[::1] ov = out
    cdef intp i, node
    with nogil:
        for i in range(n):
            node = 0
            while feature[node] >= 0:
                if Xv[i, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            ov[i] = value[node]
    return out
