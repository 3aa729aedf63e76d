"""FeNeC: weighted k-nearest-neighbor classification over class centroids.

Each stored class contributes ``n_clusters`` k-means centroids and one
precision matrix. A query is scored by selecting the ``n_neighbors``
globally smallest squared Mahalanobis distances across all centroids and
summing the inverse distances per class; the class with the largest sum
wins. With one cluster and one neighbor this reduces to the
nearest-class-prototype rule.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .clustering import CentroidSet, kmeans
from .config import METHOD_FENEC_LOG, HyperParams
from .covariance import (
    METRIC_EUCLIDEAN,
    ClassCovariance,
    ShrinkageParams,
    batched_squared_distances,
    estimate_covariance,
    invert_spd,
    normalize_covariance,
    shrink,
)
from .errors import (
    ConfigError,
    DuplicateClassError,
    InsufficientDataError,
    ShapeError,
)
from .feature_store import FeatureBatch
from .preprocessing import PreprocessConfig, apply_preprocessing


def _worker_count() -> int:
    """Worker cap from FENEC_THREADS; defaults to sequential execution."""
    raw = os.environ.get("FENEC_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


@dataclass(frozen=True)
class ClassState:
    """Everything stored for one class: precision matrix plus centroids."""

    covariance: ClassCovariance
    centroids: CentroidSet


class FeNeC:
    """Exemplar-free class-incremental classifier (kNN decision rule).

    Tasks are fitted one at a time; per-class statistics never change once
    stored, so earlier tasks are never revisited. The model is immutable
    between ``fit_task`` calls and safe for concurrent prediction.
    """

    def __init__(self, hyper: HyperParams, seed: int = 0):
        if seed < 0:
            raise ConfigError(f"seed must be non-negative, got {seed}")
        self.hyper = hyper
        self.seed = int(seed)
        self.n_features: int | None = None
        self.tasks_fitted = 0
        self._classes: dict = {}
        self._pred_cache = None

    # -- fitting ---------------------------------------------------------

    @property
    def preprocess(self) -> PreprocessConfig:
        return PreprocessConfig(
            tukey_lambda=self.hyper.tukey_lambda,
            sample_normalize=self.hyper.sample_normalize,
        )

    def _class_seed(self, class_id: int) -> np.random.SeedSequence:
        # Depends only on (model seed, class id) so fitting order never
        # changes a class's centroids.
        return np.random.SeedSequence(self.seed, spawn_key=(0, int(class_id)))

    def _fit_class(self, class_id: int, rows: np.ndarray) -> ClassState:
        feats = apply_preprocessing(rows, self.preprocess)
        if self.hyper.metric == METRIC_EUCLIDEAN:
            cov = ClassCovariance.euclidean(class_id, feats.shape[1])
        else:
            sigma = estimate_covariance(feats)
            params = ShrinkageParams(
                self.hyper.gamma1, self.hyper.gamma2, self.hyper.shrink_repetitions
            )
            precision = invert_spd(normalize_covariance(shrink(sigma, params)))
            cov = ClassCovariance(class_id, precision)
        result = kmeans(feats, self.hyper.n_clusters, self._class_seed(class_id))
        return ClassState(cov, CentroidSet(class_id, result.centroids))

    def fit_task(self, train: FeatureBatch) -> "FeNeC":
        """Fit every class present in ``train``; existing classes are untouched."""
        if self.n_features is None:
            self.n_features = train.n_features
        elif train.n_features != self.n_features:
            raise ShapeError(
                f"batch has {train.n_features} features, model expects {self.n_features}"
            )
        class_ids = [int(c) for c in train.classes()]
        for class_id in class_ids:
            if class_id in self._classes:
                raise DuplicateClassError(f"class {class_id} is already stored")
        feats = train.features.astype(np.float64)
        labels = train.labels
        groups = []
        for class_id in class_ids:
            rows = feats[labels == class_id]
            if rows.shape[0] < 2:
                raise InsufficientDataError(
                    f"class {class_id} has {rows.shape[0]} samples, need at least 2"
                )
            if rows.shape[0] < self.hyper.n_clusters:
                raise InsufficientDataError(
                    f"class {class_id} has {rows.shape[0]} samples, "
                    f"fewer than n_clusters={self.hyper.n_clusters}"
                )
            groups.append((class_id, rows))

        workers = _worker_count()
        if workers > 1 and len(groups) > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                states = list(pool.map(lambda g: self._fit_class(*g), groups))
        else:
            states = [self._fit_class(cid, rows) for cid, rows in groups]
        for (class_id, _), state in zip(groups, states):
            self._classes[class_id] = state
        self.tasks_fitted += 1
        self._pred_cache = None
        return self

    # -- inspection ------------------------------------------------------

    @property
    def classes(self) -> tuple:
        return tuple(sorted(self._classes))

    @property
    def n_classes(self) -> int:
        return len(self._classes)

    def class_state(self, class_id: int) -> ClassState:
        return self._classes[int(class_id)]

    @property
    def parameter_count(self) -> int:
        """Stored parameters: one precision matrix plus centroids per class."""
        if self.n_features is None:
            return 0
        f = self.n_features
        return self.n_classes * f * (self.hyper.n_clusters + f)

    # -- prediction ------------------------------------------------------

    def _prepare_queries(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :]
        if x.ndim != 2:
            raise ShapeError(f"queries must be 1-D or 2-D, got ndim={x.ndim}")
        if self.n_features is None or not self._classes:
            raise ValueError("model has no fitted classes")
        if x.shape[1] != self.n_features:
            raise ShapeError(
                f"queries have {x.shape[1]} features, model expects {self.n_features}"
            )
        return apply_preprocessing(x, self.preprocess)

    def _all_distances(self, queries: np.ndarray) -> tuple:
        """Distances to every stored centroid, columns ordered by (class, index)."""
        parts = []
        col_class = []
        for class_id in self.classes:
            state = self._classes[class_id]
            parts.append(
                batched_squared_distances(queries, state.centroids.centroids, state.covariance)
            )
            col_class.extend([class_id] * state.centroids.k)
        return np.hstack(parts), np.asarray(col_class, dtype=np.int64)

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Class ids for a (n, f) query matrix (or a single f-vector)."""
        single = np.asarray(x).ndim == 1
        queries = self._prepare_queries(x)
        dists, col_class = self._all_distances(queries)
        n, total = dists.shape
        k_eff = min(self.hyper.n_neighbors, total)

        # Stable sort ties on column order, which is (class id, centroid
        # index) ascending: exactly the documented tie-break.
        order = np.argsort(dists, axis=1, kind="stable")
        top = order[:, :k_eff]
        top_d = np.take_along_axis(dists, top, axis=1)
        top_class = col_class[top]

        classes = np.asarray(self.classes, dtype=np.int64)
        class_col = np.searchsorted(classes, top_class)
        scores = np.zeros((n, classes.size))
        rows = np.broadcast_to(np.arange(n)[:, None], top.shape)
        safe = np.where(top_d > 0, top_d, 1.0)  # zero hits handled below
        inv = np.where(top_d > 0, 1.0 / safe, 0.0)
        np.add.at(scores, (rows, class_col), inv)
        preds = classes[np.argmax(scores, axis=1)]

        # Exact hit: a selected zero distance decides immediately. The
        # selection order puts it first among the selected entries.
        zero_rows, zero_cols = np.nonzero(top_d == 0.0)
        if zero_rows.size:
            first = {}
            for r, c in zip(zero_rows.tolist(), zero_cols.tolist()):
                if r not in first:
                    first[r] = c
            for r, c in first.items():
                preds[r] = top_class[r, c]

        return int(preds[0]) if single else preds

    def predict_one(self, x: np.ndarray) -> int:
        return int(self.predict(np.asarray(x)))

    def score(self, batch: FeatureBatch) -> float:
        """Accuracy on a labelled batch."""
        preds = self.predict(batch.features)
        return float(np.mean(preds == batch.labels))


def new_model(hyper: HyperParams, seed: int = 0):
    """Instantiate the classifier matching ``hyper.method``."""
    if hyper.method == METHOD_FENEC_LOG:
        from .logit_head import FeNeCLog

        return FeNeCLog(hyper, seed=seed)
    return FeNeC(hyper, seed=seed)
