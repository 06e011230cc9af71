"""Kernel backend selection.

The compiled extension is used when it was built; set ``NARXQOE_PURE_PYTHON=1``
to force the numpy fallback.
"""
import os

from . import _kernels_py

BACKEND = "python"
best_split = _kernels_py.best_split
tree_predict = _kernels_py.tree_predict

if not os.environ.get("NARXQOE_PURE_PYTHON"):
    try:
        from . import _ckernels
    except ImportError:
        pass
    else:
        BACKEND = "cython"
        best_split = _ckernels.best_split
        tree_predict = _ckernels.tree_predict
