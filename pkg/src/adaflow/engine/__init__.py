"""Execution and estimation: streaming simulator, dense integer oracle,
IDX datasets, calibrated cost model."""

from .idx import load_dataset, load_idx, save_idx
from .metrics import (
    ANCHORS,
    CostModel,
    ProfileMetrics,
    estimate,
    fit_cost_model,
    metrics_to_csv,
    per_actor_breakdown,
)
from .oracle import dense_oracle, evaluate, evaluate_graph, predict
from .streaming import InferenceResult, StreamingEngine, run_streaming

__all__ = [
    "ANCHORS",
    "CostModel",
    "InferenceResult",
    "ProfileMetrics",
    "StreamingEngine",
    "dense_oracle",
    "estimate",
    "evaluate",
    "evaluate_graph",
    "fit_cost_model",
    "load_dataset",
    "load_idx",
    "metrics_to_csv",
    "per_actor_breakdown",
    "predict",
    "run_streaming",
    "save_idx",
]
