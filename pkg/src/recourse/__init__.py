"""Counterfactual explanations for small tabular neural classifiers.

Train a compact feed-forward net, then answer "what is the smallest change
to this person's data that would have produced the score they wanted?" with
sparse, human-readable statements - plus the machinery to archive models and
serve those answers over HTTP for auditing.
"""

from .data import (
    Dataset,
    DatasetError,
    Feature,
    FeatureSchema,
    FeatureSpace,
    Standardizer,
    builtin,
    load_csv,
    lsat_schema,
    pima_schema,
)
from .distances import DistanceSpec, FeatureStats, distance, fit_stats
from .model import (
    AdamConfig,
    AdamState,
    MlpModel,
    TrainConfig,
    adam_step,
    init_model,
    train,
)
from .search import (
    CfQuery,
    Counterfactual,
    DependenceReport,
    LambdaSchedule,
    NotConverged,
    dependence_flags,
    objective,
    solve_best,
    solve_clamped,
    solve_diverse,
    solve_single,
)
from .text import Explanation, render, render_set

__all__ = [
    "AdamConfig",
    "AdamState",
    "CfQuery",
    "Counterfactual",
    "Dataset",
    "DatasetError",
    "DependenceReport",
    "DistanceSpec",
    "Explanation",
    "Feature",
    "FeatureSchema",
    "FeatureSpace",
    "FeatureStats",
    "LambdaSchedule",
    "MlpModel",
    "NotConverged",
    "Standardizer",
    "TrainConfig",
    "adam_step",
    "builtin",
    "dependence_flags",
    "distance",
    "fit_stats",
    "init_model",
    "load_csv",
    "lsat_schema",
    "objective",
    "pima_schema",
    "render",
    "render_set",
    "solve_best",
    "solve_clamped",
    "solve_diverse",
    "solve_single",
    "train",
]

__version__ = "0.1.0"
