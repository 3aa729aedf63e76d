"""Hyperparameter and run-configuration handling.

Config files are JSON with explicit fields; unknown keys are rejected so
typos fail fast instead of silently running with defaults.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

from .covariance import METRIC_EUCLIDEAN, METRIC_MAHALANOBIS
from .errors import ConfigError

METHOD_FENEC = "fenec"
METHOD_FENEC_LOG = "fenec_log"


def _check_keys(d: dict, allowed, where: str) -> None:
    unknown = set(d) - set(allowed)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")


@dataclass(frozen=True)
class HyperParams:
    """Classifier hyperparameters.

    ``n_neighbors`` is the global neighbor count for the kNN decision rule
    and is read as the per-class point count by the log-likelihood variant.
    ``learning_rate`` is required for the log-likelihood variant and ignored
    otherwise.
    """

    method: str = METHOD_FENEC
    n_clusters: int = 1
    n_neighbors: int = 1
    tukey_lambda: float | None = None
    gamma1: float = 1.0
    gamma2: float = 0.0
    shrink_repetitions: int = 1
    metric: str = METRIC_MAHALANOBIS
    sample_normalize: bool = False
    learning_rate: float | None = None

    def __post_init__(self) -> None:
        if self.method not in (METHOD_FENEC, METHOD_FENEC_LOG):
            raise ConfigError(f"unknown method {self.method!r}")
        if not isinstance(self.n_clusters, int) or self.n_clusters < 1:
            raise ConfigError(f"n_clusters must be a positive integer, got {self.n_clusters}")
        if not isinstance(self.n_neighbors, int) or self.n_neighbors < 1:
            raise ConfigError(f"n_neighbors must be a positive integer, got {self.n_neighbors}")
        if self.tukey_lambda is not None and not self.tukey_lambda > 0:
            raise ConfigError(f"tukey_lambda must be positive, got {self.tukey_lambda}")
        if self.gamma1 < 0 or self.gamma2 < 0:
            raise ConfigError("gamma1 and gamma2 must be non-negative")
        if self.shrink_repetitions not in (1, 2):
            raise ConfigError(
                f"shrink_repetitions must be 1 or 2, got {self.shrink_repetitions}"
            )
        if self.metric not in (METRIC_MAHALANOBIS, METRIC_EUCLIDEAN):
            raise ConfigError(f"unknown metric {self.metric!r}")
        if not isinstance(self.sample_normalize, bool):
            raise ConfigError("sample_normalize must be a boolean")
        if self.method == METHOD_FENEC_LOG:
            if self.learning_rate is None or not self.learning_rate > 0:
                raise ConfigError("the log-likelihood method requires a positive learning_rate")

    _FIELDS = (
        "n_clusters",
        "n_neighbors",
        "tukey_lambda",
        "gamma1",
        "gamma2",
        "shrink_repetitions",
        "metric",
        "sample_normalize",
        "learning_rate",
    )

    @classmethod
    def from_dict(cls, d: dict, method: str) -> "HyperParams":
        _check_keys(d, cls._FIELDS, "hyperparams")
        return cls(method=method, **d)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "n_clusters": self.n_clusters,
            "n_neighbors": self.n_neighbors,
            "tukey_lambda": self.tukey_lambda,
            "gamma1": self.gamma1,
            "gamma2": self.gamma2,
            "shrink_repetitions": self.shrink_repetitions,
            "metric": self.metric,
            "sample_normalize": self.sample_normalize,
            "learning_rate": self.learning_rate,
        }


@dataclass(frozen=True)
class TrainingSection:
    """Training-loop knobs for the logit head (learning rate lives in HyperParams)."""

    batch_size: int = 64
    max_epochs: int = 200
    patience: int = 10
    validation_fraction: float = 0.1

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.max_epochs < 1:
            raise ConfigError(f"max_epochs must be >= 1, got {self.max_epochs}")
        if self.patience < 1:
            raise ConfigError(f"patience must be >= 1, got {self.patience}")
        if not 0 < self.validation_fraction < 1:
            raise ConfigError(
                f"validation_fraction must be in (0, 1), got {self.validation_fraction}"
            )

    _FIELDS = ("batch_size", "max_epochs", "patience", "validation_fraction")

    @classmethod
    def from_dict(cls, d: dict) -> "TrainingSection":
        _check_keys(d, cls._FIELDS, "training")
        return cls(**d)

    def to_dict(self) -> dict:
        return {
            "batch_size": self.batch_size,
            "max_epochs": self.max_epochs,
            "patience": self.patience,
            "validation_fraction": self.validation_fraction,
        }


_RUN_KEYS = (
    "method",
    "train_features",
    "test_features",
    "splits",
    "seeds",
    "hyperparams",
    "training",
    "output_dir",
)


@dataclass(frozen=True)
class RunConfig:
    """One resolved experiment: data paths, split/seed pairs, hyperparameters."""

    train_features: str
    test_features: str
    splits: tuple
    seeds: tuple
    hyper: HyperParams
    training: TrainingSection | None = None
    output_dir: str | None = None

    def __post_init__(self) -> None:
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if any(not isinstance(s, int) or s < 0 for s in self.seeds):
            raise ConfigError("seeds must be non-negative integers")
        if not self.splits:
            raise ConfigError("at least one split file is required")
        if len(self.splits) not in (1, len(self.seeds)):
            raise ConfigError(
                f"{len(self.splits)} split files cannot be paired with {len(self.seeds)} seeds"
            )
        if self.hyper.method == METHOD_FENEC_LOG and self.training is None:
            object.__setattr__(self, "training", TrainingSection())

    def runs(self) -> list:
        """(seed, split_path) pairs, one per protocol run."""
        if len(self.splits) == 1:
            return [(s, self.splits[0]) for s in self.seeds]
        return list(zip(self.seeds, self.splits))

    def with_seeds(self, seeds) -> "RunConfig":
        return RunConfig(
            train_features=self.train_features,
            test_features=self.test_features,
            splits=self.splits,
            seeds=tuple(seeds),
            hyper=self.hyper,
            training=self.training,
            output_dir=self.output_dir,
        )

    @classmethod
    def from_dict(cls, d: dict, base_dir: str = ".") -> "RunConfig":
        _check_keys(d, _RUN_KEYS, "config")
        for key in ("method", "train_features", "test_features", "splits", "seeds"):
            if key not in d:
                raise ConfigError(f"config: missing required key {key!r}")
        if "hyperparams" not in d:
            raise ConfigError("config: missing required key 'hyperparams'")
        method = d["method"]
        hyper = HyperParams.from_dict(dict(d["hyperparams"]), method=method)
        training = None
        if d.get("training") is not None:
            training = TrainingSection.from_dict(dict(d["training"]))
        splits = d["splits"]
        if isinstance(splits, str):
            splits = [splits]
        if not isinstance(splits, list) or not all(isinstance(p, str) for p in splits):
            raise ConfigError("config: 'splits' must be a path or list of paths")
        seeds = d["seeds"]
        if not isinstance(seeds, list):
            raise ConfigError("config: 'seeds' must be a list of integers")

        def resolve(p):
            return p if os.path.isabs(p) else os.path.normpath(os.path.join(base_dir, p))

        out = d.get("output_dir")
        return cls(
            train_features=resolve(d["train_features"]),
            test_features=resolve(d["test_features"]),
            splits=tuple(resolve(p) for p in splits),
            seeds=tuple(seeds),
            hyper=hyper,
            training=training,
            output_dir=resolve(out) if out is not None else None,
        )

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        return cls.from_dict(raw, base_dir=os.path.dirname(os.path.abspath(path)))

    def to_dict(self) -> dict:
        hyper = self.hyper.to_dict()
        method = hyper.pop("method")
        return {
            "method": method,
            "train_features": self.train_features,
            "test_features": self.test_features,
            "splits": list(self.splits),
            "seeds": list(self.seeds),
            "hyperparams": hyper,
            "training": self.training.to_dict() if self.training else None,
            "output_dir": self.output_dir,
        }
