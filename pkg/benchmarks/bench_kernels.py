"""Time the compiled CART kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--rows 2000] [--features 9] [--trees 50] [--repeat 3]

Each row reports the best wall time per backend, the speed-up, and whether
both backends produced identical results.
"""
import argparse
import time

import numpy as np

from narxqoe import _kernels, _kernels_py
from narxqoe.baselines import ForestConfig, fit_forest

try:
    from narxqoe import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def best_time(fn, repeat):
    out, best = None, float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def use_backend(mod):
    _kernels.best_split = mod.best_split
    _kernels.tree_predict = mod.tree_predict


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=2000)
    ap.add_argument("--features", type=int, default=9)
    ap.add_argument("--trees", type=int, default=50)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if _ckernels is None:
        raise SystemExit("compiled extension not available; run `pip install -e . --no-build-isolation` first")

    rng = np.random.default_rng(args.seed)
    X = rng.uniform(-1, 1, size=(args.rows, args.features))
    y = np.clip(3 + X @ rng.normal(0, 0.5, args.features) + rng.normal(0, 0.1, args.rows), 1, 5)
    rows = np.arange(args.rows, dtype=np.int64)
    feats = np.arange(args.features, dtype=np.int64)
    cfg = ForestConfig(n_trees=args.trees, seed=args.seed)

    cases = {
        "best_split": lambda mod: mod.best_split(X, y, rows, feats, 5),
        "forest_fit": lambda mod: (use_backend(mod), fit_forest(X, y, cfg))[1],
    }
    forest = fit_forest(X, y, cfg)
    trees = forest.trees
    cases["tree_predict"] = lambda mod: [
        mod.tree_predict(t.feature, t.threshold, t.left, t.right, t.value, X) for t in trees
    ]

    print(f"{'kernel':<14} {'cython s':>10} {'numpy s':>10} {'speed-up':>9}  identical")
    for name, fn in cases.items():
        tc, oc = best_time(lambda: fn(_ckernels), args.repeat)
        tp, op = best_time(lambda: fn(_kernels_py), args.repeat)
        if name == "forest_fit":
            same = np.array_equal(oc.predict(X), op.predict(X))
        elif name == "tree_predict":
            same = all(np.array_equal(a, b) for a, b in zip(oc, op))
        else:
            same = oc == op
        print(f"{name:<14} {tc:>10.4f} {tp:>10.4f} {tp / tc:>8.1f}x  {same}")
    use_backend(_ckernels)


if __name__ == "__main__":
    main()
