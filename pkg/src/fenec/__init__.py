"""fenec: exemplar-free class-incremental classification over feature files.

Two classifiers share the same per-class statistics (shrunk, normalized,
inverted covariance plus k-means centroids computed on power-transformed
features): :class:`FeNeC` decides by inverse-distance-weighted kNN over
all stored centroids, :class:`FeNeCLog` by softmaxed log-likelihood logits
with two shared scalars trained on the first task only.
"""

from . import errors
from .classifier import ClassState, FeNeC, new_model
from .clustering import CentroidSet, KMeansResult, kmeans
from .config import (
    METHOD_FENEC,
    METHOD_FENEC_LOG,
    HyperParams,
    RunConfig,
    TrainingSection,
)
from .covariance import (
    METRIC_EUCLIDEAN,
    METRIC_MAHALANOBIS,
    ClassCovariance,
    ShrinkageParams,
    batched_squared_distances,
    estimate_covariance,
    invert_spd,
    normalize_covariance,
    shrink,
    squared_distance,
)
from .feature_store import (
    FeatureBatch,
    Task,
    TaskStream,
    build_task_stream,
    load_feature_file,
    load_split,
    read_fenc_header,
    write_feature_file,
)
from .logit_head import FeNeCLog, LogitHead, TrainConfig, TrainingLog
from .model_io import load_model, read_model_header, write_model
from .preprocessing import (
    PreprocessConfig,
    apply_preprocessing,
    sample_normalize,
    tukey_transform,
)
from .protocol import (
    RunReport,
    RunSummary,
    aggregate_runs,
    config_fingerprint,
    run_protocol,
)

__version__ = "0.1.0"

__all__ = [
    "CentroidSet",
    "ClassCovariance",
    "ClassState",
    "FeNeC",
    "FeNeCLog",
    "FeatureBatch",
    "HyperParams",
    "KMeansResult",
    "LogitHead",
    "METHOD_FENEC",
    "METHOD_FENEC_LOG",
    "METRIC_EUCLIDEAN",
    "METRIC_MAHALANOBIS",
    "PreprocessConfig",
    "RunConfig",
    "RunReport",
    "RunSummary",
    "ShrinkageParams",
    "Task",
    "TaskStream",
    "TrainConfig",
    "TrainingLog",
    "TrainingSection",
    "aggregate_runs",
    "apply_preprocessing",
    "batched_squared_distances",
    "build_task_stream",
    "config_fingerprint",
    "errors",
    "estimate_covariance",
    "invert_spd",
    "kmeans",
    "load_feature_file",
    "load_model",
    "load_split",
    "new_model",
    "normalize_covariance",
    "read_fenc_header",
    "read_model_header",
    "run_protocol",
    "sample_normalize",
    "shrink",
    "squared_distance",
    "tukey_transform",
    "write_feature_file",
    "write_model",
]
