"""Multinomial logit models with interpretable categorical embeddings."""

__version__ = "0.1.0"

from .data import ChoiceDataset, Schema, Vocabulary, discretize, dummy_expand, load_csv, split
from .embeddings import EmbeddingArtifact, encode_with_artifact, export_artifact, import_artifact
from .models import ModelParams, ModelSpec, log_likelihood, predict_proba
from .stats import coefficient_table, estimate_table, hessian_interpretable, model_summary
from .training import FitConfig, RunResult, fit, fit_dummy_baseline, fit_multi

__all__ = [
    "ChoiceDataset",
    "EmbeddingArtifact",
    "FitConfig",
    "ModelParams",
    "ModelSpec",
    "RunResult",
    "Schema",
    "Vocabulary",
    "coefficient_table",
    "discretize",
    "dummy_expand",
    "encode_with_artifact",
    "estimate_table",
    "export_artifact",
    "fit",
    "fit_dummy_baseline",
    "fit_multi",
    "hessian_interpretable",
    "import_artifact",
    "load_csv",
    "log_likelihood",
    "model_summary",
    "predict_proba",
    "split",
]
