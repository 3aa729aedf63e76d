"""Per-class covariance estimation, shrinkage, normalization and distances.

The pipeline that produces one class's precision matrix is

    sample covariance -> shrink (1 or 2 times) -> correlation-normalize
                      -> Cholesky-based inversion

Shrinkage adds ``gamma1 * mean(diagonal)`` to every diagonal entry and
``gamma2 * mean(off-diagonal)`` to every off-diagonal entry; normalization
divides entry (i, j) by ``sqrt(sigma_ii * sigma_jj)`` so the result has
unit diagonal.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve

from .errors import (
    ConditioningError,
    ConfigError,
    InsufficientDataError,
    NormalizationError,
    ShapeError,
)

METRIC_MAHALANOBIS = "mahalanobis"
METRIC_EUCLIDEAN = "euclidean"

# Entries this small get recomputed with the exact quadratic form so that a
# true hit (query == centroid) yields exactly 0.0 even on the batched path.
_EXACT_HIT_CUTOFF = 1e-12


@dataclass(frozen=True)
class ShrinkageParams:
    gamma1: float
    gamma2: float
    repetitions: int = 1

    def __post_init__(self) -> None:
        if self.gamma1 < 0 or self.gamma2 < 0:
            raise ConfigError("shrinkage strengths must be non-negative")
        if self.repetitions not in (1, 2):
            raise ConfigError(f"repetitions must be 1 or 2, got {self.repetitions}")


def estimate_covariance(x: np.ndarray) -> np.ndarray:
    """Sample covariance with the (n - 1) denominator, in float64."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeError(f"expected a 2-D sample matrix, got ndim={x.ndim}")
    n = x.shape[0]
    if n < 2:
        raise InsufficientDataError(f"covariance needs at least 2 samples, got {n}")
    centered = x - x.mean(axis=0)
    sigma = centered.T @ centered / (n - 1)
    return (sigma + sigma.T) / 2.0


def shrink(sigma: np.ndarray, params: ShrinkageParams) -> np.ndarray:
    """Additive diagonal/off-diagonal shrinkage, applied sequentially.

    Each repetition recomputes the diagonal and off-diagonal means from the
    current matrix and uses the same (gamma1, gamma2) pair.
    """
    sigma = np.asarray(sigma, dtype=np.float64)
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
        raise ShapeError(f"shrink expects a square matrix, got shape {sigma.shape}")
    n = sigma.shape[0]
    eye = np.eye(n)
    out = sigma
    for _ in range(params.repetitions):
        diag_mean = np.trace(out) / n
        if n > 1:
            off_mean = (out.sum() - np.trace(out)) / (n * n - n)
        else:
            off_mean = 0.0  # single feature: no off-diagonal entries
        out = out + params.gamma1 * diag_mean * eye + params.gamma2 * off_mean * (1.0 - eye)
    return out


def normalize_covariance(sigma_s: np.ndarray) -> np.ndarray:
    """Divide entry (i, j) by sqrt(sigma_ii * sigma_jj); unit diagonal."""
    sigma_s = np.asarray(sigma_s, dtype=np.float64)
    diag = np.diag(sigma_s)
    if np.any(diag <= 0):
        raise NormalizationError(
            "covariance has a non-positive diagonal entry; apply shrinkage first"
        )
    scale = np.sqrt(diag)
    return sigma_s / np.outer(scale, scale)


def invert_spd(sigma: np.ndarray) -> np.ndarray:
    """Invert a symmetric positive definite matrix via Cholesky."""
    sigma = np.asarray(sigma, dtype=np.float64)
    try:
        lower = np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError as exc:
        raise ConditioningError(
            "covariance is not positive definite; increase gamma1"
        ) from exc
    inv = cho_solve((lower, True), np.eye(sigma.shape[0]))
    return (inv + inv.T) / 2.0


@dataclass(frozen=True)
class ClassCovariance:
    """Stored precision matrix (inverse normalized shrunk covariance) of a class."""

    class_id: int
    precision: np.ndarray
    metric: str = METRIC_MAHALANOBIS
    chol_lower: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.metric not in (METRIC_MAHALANOBIS, METRIC_EUCLIDEAN):
            raise ConfigError(f"unknown metric {self.metric!r}")
        prec = np.asarray(self.precision, dtype=np.float64)
        if prec.ndim != 2 or prec.shape[0] != prec.shape[1]:
            raise ShapeError(f"precision must be square, got shape {prec.shape}")
        scale = max(float(np.abs(prec).max()), 1.0)
        if not np.allclose(prec, prec.T, rtol=1e-9, atol=1e-9 * scale):
            raise ShapeError("precision matrix is not symmetric")
        if self.metric == METRIC_EUCLIDEAN and not np.array_equal(
            prec, np.eye(prec.shape[0])
        ):
            raise ConfigError("euclidean metric requires an identity precision")
        try:
            lower = np.linalg.cholesky(prec)
        except np.linalg.LinAlgError as exc:
            raise ConditioningError(
                "precision matrix is not positive definite"
            ) from exc
        prec.flags.writeable = False
        object.__setattr__(self, "precision", prec)
        object.__setattr__(self, "chol_lower", lower)

    @classmethod
    def euclidean(cls, class_id: int, n_features: int) -> "ClassCovariance":
        return cls(class_id, np.eye(n_features), METRIC_EUCLIDEAN)

    @property
    def n_features(self) -> int:
        return self.precision.shape[0]


def squared_distance(x: np.ndarray, mu: np.ndarray, cov: ClassCovariance) -> float:
    """Quadratic form (x - mu)^T P (x - mu); squared Euclidean when P = I."""
    x = np.asarray(x, dtype=np.float64)
    mu = np.asarray(mu, dtype=np.float64)
    if x.shape != mu.shape or x.ndim != 1:
        raise ShapeError(f"vector shapes differ: {x.shape} vs {mu.shape}")
    if x.shape[0] != cov.n_features:
        raise ShapeError(
            f"vectors have {x.shape[0]} features but precision is {cov.n_features}-dimensional"
        )
    diff = x - mu
    if cov.metric == METRIC_EUCLIDEAN:
        return float(diff @ diff)
    return float(diff @ cov.precision @ diff)


def batched_squared_distances(
    x: np.ndarray, centroids: np.ndarray, cov: ClassCovariance
) -> np.ndarray:
    """Distance matrix (n_queries, n_centroids) under one class's precision.

    Uses the Cholesky factor M of the precision (P = M M^T), so each
    distance is the squared norm of (x - c) @ M, evaluated through the
    inner-product expansion. Entries near zero are recomputed with the
    exact quadratic form; results match :func:`squared_distance` to 1e-10.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    centroids = np.atleast_2d(np.asarray(centroids, dtype=np.float64))
    if x.shape[1] != cov.n_features or centroids.shape[1] != cov.n_features:
        raise ShapeError(
            f"queries have {x.shape[1]} and centroids {centroids.shape[1]} features, "
            f"precision is {cov.n_features}-dimensional"
        )
    if cov.metric == METRIC_EUCLIDEAN:
        xm, cm = x, centroids
    else:
        xm = x @ cov.chol_lower
        cm = centroids @ cov.chol_lower
    sq = (
        np.einsum("ij,ij->i", xm, xm)[:, None]
        + np.einsum("ij,ij->i", cm, cm)[None, :]
        - 2.0 * (xm @ cm.T)
    )
    np.maximum(sq, 0.0, out=sq)
    # Refine near-zero entries so exact hits come out as exactly 0.0.
    near = np.argwhere(sq <= _EXACT_HIT_CUTOFF)
    for i, j in near:
        sq[i, j] = squared_distance(x[i], centroids[j], cov)
    return sq
