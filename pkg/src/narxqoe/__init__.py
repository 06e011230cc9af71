"""NARX-based no-reference audiovisual quality estimation.

Predicts mean opinion score (MOS, 1-5) from periodic QoS / bitstream
parameters with a single-hidden-layer NARX network trained by
Bayesian-regularized Levenberg-Marquardt.
"""
__version__ = "0.1.0"

from .dataset import (
    CANONICAL_SCHEMA,
    FeatureSchema,
    FoldPlan,
    Normalizer,
    QosRecord,
    fit_normalizer,
    load_csv,
    make_folds,
    make_lagged,
    synth_narx_series,
)
from .metrics import EvalReport, evaluate_cv, mse, pearson, rmse
from .monitor import MonitorSession, run_stream
from .narx import (
    NarxModel,
    NarxTopology,
    forward_closed_loop,
    forward_open_loop,
    forward_sample,
    init_model,
    jacobian,
    load_model,
    save_model,
)
from .training import TrainConfig, TrainReport, effective_parameters, train

__all__ = [
    "CANONICAL_SCHEMA",
    "EvalReport",
    "FeatureSchema",
    "FoldPlan",
    "MonitorSession",
    "NarxModel",
    "NarxTopology",
    "Normalizer",
    "QosRecord",
    "TrainConfig",
    "TrainReport",
    "effective_parameters",
    "evaluate_cv",
    "fit_normalizer",
    "forward_closed_loop",
    "forward_open_loop",
    "forward_sample",
    "init_model",
    "jacobian",
    "load_csv",
    "load_model",
    "make_folds",
    "make_lagged",
    "mse",
    "pearson",
    "rmse",
    "run_stream",
    "save_model",
    "synth_narx_series",
    "train",
]
