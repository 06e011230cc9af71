"""Pure numpy versions of the CART kernels in ``_ckernels.pyx``."""
import numpy as np


def best_split(X, y, rows, features, min_leaf):
    """Best variance-reduction split over ``features`` for the given rows.

    Returns ``(feature, threshold, gain)``; ``feature`` is -1 when no split
    leaves at least ``min_leaf`` samples on both sides.
    """
    m = rows.shape[0]
    if m < 2 * min_leaf:
        return -1, 0.0, 0.0
    best_score, best_feat, best_thr, best_total = -1.0, -1, 0.0, 0.0
    nl = np.arange(1, m, dtype=np.float64)
    nr = m - nl
    size_ok = (nl >= min_leaf) & (nr >= min_leaf)
    sub = X[rows]
    ysub = y[rows]
    for f in features:
        col = sub[:, f]
        order = np.argsort(col, kind="stable")
        v = col[order]
        csum = np.cumsum(ysub[order])
        total = csum[-1]
        sl = csum[:-1]
        sr = total - sl
        valid = size_ok & (v[:-1] < v[1:])
        if not valid.any():
            continue
        score = (sl * sl) / nl + (sr * sr) / nr
        score = np.where(valid, score, -np.inf)
        i = int(np.argmax(score))
        if score[i] > best_score:
            best_score, best_feat, best_total = float(score[i]), int(f), float(total)
            thr = v[i] + (v[i + 1] - v[i]) / 2.0
            best_thr = float(v[i] if thr >= v[i + 1] else thr)
    if best_feat < 0:
        return -1, 0.0, 0.0
    return best_feat, best_thr, best_score - (best_total * best_total) / m


def tree_predict(feature, threshold, left, right, value, X):
    node = np.zeros(X.shape[0], dtype=np.int64)
    rows = np.arange(X.shape[0])
    active = feature[node] >= 0
    while active.any():
        idx = rows[active]
        nd = node[idx]
        go_left = X[idx, feature[nd]] <= threshold[nd]
        node[idx] = np.where(go_left, left[nd], right[nd])
        active = feature[node] >= 0
    return value[node]
