# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled CART kernels. Arithmetic order mirrors ``_kernels_py`` exactly."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def best_split(const double[:, ::1] X, const double[::1] y,
               const cnp.int64_t[::1] rows, const cnp.int64_t[::1] features,
               Py_ssize_t min_leaf):
    cdef Py_ssize_t m = rows.shape[0]
    cdef Py_ssize_t nf = features.shape[0]
    cdef Py_ssize_t fi, i, f, nl, nr
    cdef double total, sl, sr, score, thr, gain
    cdef double best_score = -1.0
    cdef double best_thr = 0.0, best_total = 0.0
    cdef Py_ssize_t best_feat = -1
    cdef cnp.ndarray[double, ndim=1] vals = np.empty(m)
    cdef cnp.ndarray[double, ndim=1] ys = np.empty(m)
    cdef double[::1] v
    cdef double[::1] ysv
    cdef cnp.int64_t[::1] order
    cdef double[::1] col = np.empty(m)
    if m < 2 * min_leaf:
        return -1, 0.0, 0.0
    v = vals
    ysv = ys
    for fi in range(nf):
        f = features[fi]
        for i in range(m):
            col[i] = X[rows[i], f]
        order = np.argsort(np.asarray(col), kind="stable").astype(np.int64)
        total = 0.0
        for i in range(m):
            v[i] = col[order[i]]
            ysv[i] = y[rows[order[i]]]
            total = total + ysv[i]
        sl = 0.0
        for i in range(m - 1):
            sl = sl + ysv[i]
            nl = i + 1
            nr = m - nl
            if nl < min_leaf or nr < min_leaf or not (v[i] < v[i + 1]):
                continue
            sr = total - sl
            score = (sl * sl) / nl + (sr * sr) / nr
            if score > best_score:
                best_score = score
                best_feat = f
                best_total = total
                thr = v[i] + (v[i + 1] - v[i]) / 2.0
                if thr >= v[i + 1]:
                    thr = v[i]
                best_thr = thr
    if best_feat < 0:
        return -1, 0.0, 0.0
    gain = best_score - (best_total * best_total) / m
    return best_feat, best_thr, gain


def tree_predict(const cnp.int64_t[::1] feature, const double[::1] threshold,
                 const cnp.int64_t[::1] left, const cnp.int64_t[::1] right,
                 const double[::1] value, const double[:, ::1] X):
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t i, node
    cdef cnp.ndarray[double, ndim=1] out = np.empty(n)
    for i in range(n):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = value[node]
    return out
