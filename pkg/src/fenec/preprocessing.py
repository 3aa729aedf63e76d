"""Feature preprocessing: power transform and per-sample normalization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError, NormalizationError


@dataclass(frozen=True)
class PreprocessConfig:
    """What to apply to features before covariance/distance computation.

    ``tukey_lambda`` may only be set when every feature value in the
    dataset is non-negative (ResNet-style extractors); ``sample_normalize``
    rescales each row to unit Euclidean norm.
    """

    tukey_lambda: float | None = None
    sample_normalize: bool = False

    def __post_init__(self) -> None:
        if self.tukey_lambda is not None and not self.tukey_lambda > 0:
            raise ConfigError(f"tukey_lambda must be positive, got {self.tukey_lambda}")


def tukey_transform(x: np.ndarray, lam: float) -> np.ndarray:
    """Elementwise power transform ``x ** lam`` for non-negative inputs."""
    if not lam > 0:
        raise ConfigError(f"tukey exponent must be positive, got {lam}")
    x = np.asarray(x, dtype=np.float64)
    if x.size and x.min() < 0:
        raise DataError("tukey transform requires non-negative features")
    return np.power(x, lam)


def sample_normalize(x: np.ndarray) -> np.ndarray:
    """Rescale every row to unit Euclidean norm. Rejects all-zero rows."""
    x = np.asarray(x, dtype=np.float64)
    norms = np.linalg.norm(x, axis=1)
    if np.any(norms == 0):
        bad = int(np.argmax(norms == 0))
        raise NormalizationError(f"row {bad} has zero norm and cannot be normalized")
    return x / norms[:, None]


def apply_preprocessing(x: np.ndarray, config: PreprocessConfig) -> np.ndarray:
    """Tukey transform (if configured) followed by sample normalization."""
    x = np.asarray(x, dtype=np.float64)
    if config.tukey_lambda is not None:
        x = tukey_transform(x, config.tukey_lambda)
    if config.sample_normalize:
        x = sample_normalize(x)
    return x
