"""Synthetic ground truth, run logs, and the MLP predictor backend."""

from mfmsbo.simulator.mlp import (
    MlpPredictor,
    PredictorSimulator,
    encode_inputs,
    mlp_forward,
    mlp_train,
    r_squared,
)
from mfmsbo.simulator.runlog import HEADER, RunLog, emit_runlog, ingest_runlog, synthesize_runlog
from mfmsbo.simulator.surface import (
    ACCURACY_METRICS,
    DATASETS,
    LOSS_METRICS,
    METRICS,
    SurfaceSpec,
    acceptance_surface,
    is_accuracy,
    mint_surface,
    surface_curve,
    surface_evaluate,
    surface_optimum,
)

__all__ = [
    "ACCURACY_METRICS",
    "DATASETS",
    "HEADER",
    "LOSS_METRICS",
    "METRICS",
    "MlpPredictor",
    "PredictorSimulator",
    "RunLog",
    "SurfaceSpec",
    "acceptance_surface",
    "emit_runlog",
    "encode_inputs",
    "ingest_runlog",
    "is_accuracy",
    "mint_surface",
    "mlp_forward",
    "mlp_train",
    "r_squared",
    "surface_curve",
    "surface_evaluate",
    "surface_optimum",
    "synthesize_runlog",
]
