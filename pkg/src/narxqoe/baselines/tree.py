"""CART regression trees (variance-reduction splits)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import _kernels


@dataclass
class RegressionTree:
    """Flat node arrays; ``feature == -1`` marks a leaf, node 0 is the root."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray
    importance: np.ndarray
    max_depth: int | None
    min_samples_leaf: int

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        return _kernels.tree_predict(self.feature, self.threshold, self.left, self.right, self.value, X)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by each row."""
        out = np.empty(X.shape[0], dtype=np.int64)
        for i, row in enumerate(X):
            node = 0
            while self.feature[node] >= 0:
                node = self.left[node] if row[self.feature[node]] <= self.threshold[node] else self.right[node]
            out[i] = node
        return out


def build_tree(
    X: np.ndarray,
    y: np.ndarray,
    rows: np.ndarray,
    rng: np.random.Generator,
    m_try: int,
    min_samples_leaf: int = 5,
    max_depth: int | None = None,
) -> RegressionTree:
    """Grow one tree on ``X[rows]`` (rows may repeat, as in a bootstrap draw).

    At each node ``m_try`` features are drawn without replacement and the
    split maximizing the reduction in summed squared error is kept.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    p = X.shape[1]
    feature, threshold, left, right, value, count = [], [], [], [], [], []
    importance = np.zeros(p)

    def new_node(node_rows):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(float(np.mean(y[node_rows])))
        count.append(int(node_rows.size))
        return len(feature) - 1

    stack = [(new_node(rows), np.asarray(rows, dtype=np.int64), 0)]
    while stack:
        node, node_rows, depth = stack.pop()
        ys = y[node_rows]
        if (max_depth is not None and depth >= max_depth) or node_rows.size < 2 * min_samples_leaf:
            continue
        if np.ptp(ys) == 0.0:
            continue
        feats = rng.choice(p, size=m_try, replace=False).astype(np.int64) if m_try < p else np.arange(p, dtype=np.int64)
        f, thr, gain = _kernels.best_split(X, y, node_rows, feats, min_samples_leaf)
        if f < 0 or not gain > 0.0:
            continue
        mask = X[node_rows, f] <= thr
        lrows, rrows = node_rows[mask], node_rows[~mask]
        feature[node], threshold[node] = int(f), float(thr)
        importance[f] += gain
        li, ri = new_node(lrows), new_node(rrows)
        left[node], right[node] = li, ri
        stack.append((ri, rrows, depth + 1))
        stack.append((li, lrows, depth + 1))

    return RegressionTree(
        np.array(feature, dtype=np.int64),
        np.array(threshold, dtype=np.float64),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(value, dtype=np.float64),
        np.array(count, dtype=np.int64),
        importance,
        max_depth,
        min_samples_leaf,
    )
