"""FeNeC-Log: log-likelihood logits with two shared trainable scalars.

Each class's logit is a sum over its ``n_points`` nearest centroids of
``LeakyReLU(a + b * log(d^2))`` where ``d^2`` is the squared Mahalanobis
distance; class probabilities are the softmax of those logits. The scalars
(a, b) are trained with minibatch SGD on cross-entropy during the first
task only and frozen afterwards, so later tasks add classes without any
further optimization.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .classifier import FeNeC
from .config import HyperParams
from .covariance import batched_squared_distances
from .errors import ConfigError, DegenerateLossError
from .feature_store import FeatureBatch

_LOG_FLOOR = np.finfo(np.float64).tiny


@dataclass
class LogitHead:
    """The two shared scalars of the logit rule plus the activation slope."""

    a: float
    b: float
    leaky_slope: float = 0.01
    frozen: bool = False

    def __post_init__(self) -> None:
        if not 0 < self.leaky_slope < 1:
            raise ConfigError(f"leaky_slope must be in (0, 1), got {self.leaky_slope}")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float
    batch_size: int = 64
    max_epochs: int = 200
    patience: int = 10
    validation_fraction: float = 0.1
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.learning_rate > 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.max_epochs < 1:
            raise ConfigError("max_epochs must be >= 1")
        if self.patience < 1:
            raise ConfigError("patience must be >= 1")
        if not 0 < self.validation_fraction < 1:
            raise ConfigError("validation_fraction must be in (0, 1)")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")


@dataclass(frozen=True)
class TrainingLog:
    train_loss: tuple
    val_loss: tuple
    best_epoch: int
    epochs_run: int
    early_stopped: bool


class EarlyStopper:
    """Stops training once validation loss goes ``patience`` epochs without
    a strict improvement over the best value seen so far."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best = np.inf
        self.best_epoch = 0
        self.stale = 0
        self._epoch = 0

    def update(self, val_loss: float) -> bool:
        """Record one epoch's validation loss; True means stop now."""
        self._epoch += 1
        if val_loss < self.best:
            self.best = val_loss
            self.best_epoch = self._epoch
            self.stale = 0
            return False
        self.stale += 1
        return self.stale >= self.patience


def leaky_relu(u: np.ndarray, slope: float) -> np.ndarray:
    return np.where(u >= 0, u, slope * u)


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


class FeNeCLog(FeNeC):
    """FeNeC variant that decides through trainable log-likelihood logits."""

    def __init__(self, hyper: HyperParams, seed: int = 0):
        super().__init__(hyper, seed=seed)
        self.head: LogitHead | None = None
        self.training_log: TrainingLog | None = None

    @property
    def n_points(self) -> int:
        p = self.hyper.n_neighbors
        if p > self.hyper.n_clusters:
            warnings.warn(
                f"n_points={p} exceeds n_clusters={self.hyper.n_clusters}; "
                f"using {self.hyper.n_clusters}",
                stacklevel=2,
            )
            return self.hyper.n_clusters
        return p

    # -- logit machinery ---------------------------------------------------

    def _log_dist_tensor(self, queries: np.ndarray) -> tuple:
        """Per-class log squared distances to the n_points nearest centroids.

        Returns ``(ld, zero_class)`` where ``ld`` has shape
        (n_queries, n_classes, n_points) with ascending distances along the
        last axis, and ``zero_class[i]`` is the smallest class id whose
        centroid exactly coincides with query i (-1 if none).
        """
        classes = self.classes
        p = min(self.n_points, min(self._classes[c].centroids.k for c in classes))
        n = queries.shape[0]
        ld = np.empty((n, len(classes), p))
        zero_class = np.full(n, -1, dtype=np.int64)
        for ci, class_id in enumerate(classes):
            state = self._classes[class_id]
            d = batched_squared_distances(
                queries, state.centroids.centroids, state.covariance
            )
            hits = (d == 0.0).any(axis=1)
            zero_class[hits & (zero_class == -1)] = class_id
            if p < d.shape[1]:
                d = np.partition(d, p - 1, axis=1)[:, :p]
            ld[:, ci, :] = np.log(np.maximum(np.sort(d, axis=1), _LOG_FLOOR))
        return ld, zero_class

    @staticmethod
    def _logits_from_tensor(ld: np.ndarray, head: LogitHead) -> np.ndarray:
        u = head.a + head.b * ld
        return leaky_relu(u, head.leaky_slope).sum(axis=2)

    def class_logits(self, x: np.ndarray, head: LogitHead | None = None) -> np.ndarray:
        """Logit matrix (n_queries, n_classes) for all stored classes."""
        head = head or self._require_head()
        queries = self._prepare_queries(x)
        ld, _ = self._log_dist_tensor(queries)
        return self._logits_from_tensor(ld, head)

    def class_logit(self, x: np.ndarray, class_id: int, head: LogitHead | None = None) -> float:
        col = self.classes.index(int(class_id))
        logits = self.class_logits(np.asarray(x, dtype=np.float64)[None, :], head)
        return float(logits[0, col])

    def _require_head(self) -> LogitHead:
        if self.head is None:
            raise ValueError("logit head has not been trained yet")
        return self.head

    def predict_proba(self, x: np.ndarray, head: LogitHead | None = None) -> np.ndarray:
        """Softmax class probabilities over all classes seen so far.

        A query that exactly hits a stored centroid short-circuits to that
        centroid's class with probability one.
        """
        head = head or self._require_head()
        queries = self._prepare_queries(x)
        ld, zero_class = self._log_dist_tensor(queries)
        proba = _softmax(self._logits_from_tensor(ld, head))
        hits = np.flatnonzero(zero_class >= 0)
        if hits.size:
            classes = np.asarray(self.classes, dtype=np.int64)
            cols = np.searchsorted(classes, zero_class[hits])
            proba[hits] = 0.0
            proba[hits, cols] = 1.0
        return proba

    def predict(self, x: np.ndarray):
        single = np.asarray(x).ndim == 1
        proba = self.predict_proba(x)
        classes = np.asarray(self.classes, dtype=np.int64)
        preds = classes[np.argmax(proba, axis=1)]
        return int(preds[0]) if single else preds

    # -- training ------------------------------------------------------------

    def _columns_for(self, labels: np.ndarray) -> np.ndarray:
        classes = np.asarray(self.classes, dtype=np.int64)
        cols = np.searchsorted(classes, labels)
        if np.any(cols >= classes.size) or np.any(classes[cols] != labels):
            raise ValueError("labels refer to classes the model does not store")
        return cols

    @staticmethod
    def _loss_from_tensor(ld: np.ndarray, cols: np.ndarray, head: LogitHead) -> float:
        logits = FeNeCLog._logits_from_tensor(ld, head)
        m = logits.max(axis=1)
        lse = m + np.log(np.exp(logits - m[:, None]).sum(axis=1))
        return float(np.mean(lse - logits[np.arange(len(cols)), cols]))

    @staticmethod
    def _grads_from_tensor(ld: np.ndarray, cols: np.ndarray, head: LogitHead) -> tuple:
        u = head.a + head.b * ld
        pos = u >= 0  # subgradient at the kink uses the positive branch
        slope = np.where(pos, 1.0, head.leaky_slope)
        logits = np.where(pos, u, head.leaky_slope * u).sum(axis=2)
        g = _softmax(logits)
        g[np.arange(len(cols)), cols] -= 1.0
        g /= len(cols)
        ga = float((g * slope.sum(axis=2)).sum())
        gb = float((g * (slope * ld).sum(axis=2)).sum())
        return ga, gb

    def cross_entropy(
        self, x: np.ndarray, labels: np.ndarray, head: LogitHead | None = None
    ) -> float:
        """Mean cross-entropy of the logit rule against ground-truth labels."""
        head = head or self._require_head()
        queries = self._prepare_queries(x)
        ld, _ = self._log_dist_tensor(queries)
        return self._loss_from_tensor(ld, self._columns_for(np.asarray(labels)), head)

    def head_gradients(
        self, x: np.ndarray, labels: np.ndarray, head: LogitHead | None = None
    ) -> tuple:
        """Analytic d(loss)/da and d(loss)/db for a labelled batch."""
        head = head or self._require_head()
        queries = self._prepare_queries(x)
        ld, _ = self._log_dist_tensor(queries)
        return self._grads_from_tensor(ld, self._columns_for(np.asarray(labels)), head)

    def _stratified_split(
        self, labels: np.ndarray, fraction: float, rng: np.random.Generator
    ) -> tuple:
        train_idx, val_idx = [], []
        for class_id in np.unique(labels):
            idx = np.flatnonzero(labels == class_id)
            perm = rng.permutation(idx.size)
            n_val = max(1, int(round(fraction * idx.size)))
            n_val = min(n_val, idx.size - 1)  # keep at least one training row
            val_idx.append(idx[perm[:n_val]])
            train_idx.append(idx[perm[n_val:]])
        return np.concatenate(train_idx), np.concatenate(val_idx)

    def train_head(self, task_train: FeatureBatch, config: TrainConfig) -> LogitHead:
        """Fit (a, b) on first-task data with SGD and early stopping.

        Initializes both scalars from a standard normal draw, holds out a
        stratified validation fraction, and returns the parameters of the
        epoch with the lowest validation loss, frozen. Training stops when
        validation loss fails to improve for ``patience`` consecutive
        epochs.
        """
        if self.head is not None and self.head.frozen:
            raise ValueError("logit head is frozen; it is trained on the first task only")
        labels = task_train.labels
        if np.unique(labels).size < 2:
            raise DegenerateLossError("head training needs at least two classes")

        rng = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(1,)))
        a, b = rng.standard_normal(2)
        head = LogitHead(a=float(a), b=float(b))

        queries = self._prepare_queries(task_train.features)
        ld, _ = self._log_dist_tensor(queries)
        cols = self._columns_for(labels)
        tr_idx, va_idx = self._stratified_split(labels, config.validation_fraction, rng)
        ld_tr, cols_tr = ld[tr_idx], cols[tr_idx]
        ld_va, cols_va = ld[va_idx], cols[va_idx]

        stopper = EarlyStopper(config.patience)
        best_a, best_b = head.a, head.b
        train_hist, val_hist = [], []
        early_stopped = False
        epochs_run = 0
        for epoch in range(1, config.max_epochs + 1):
            epochs_run = epoch
            perm = rng.permutation(len(cols_tr))
            for start in range(0, len(perm), config.batch_size):
                sel = perm[start : start + config.batch_size]
                ga, gb = self._grads_from_tensor(ld_tr[sel], cols_tr[sel], head)
                head.a -= config.learning_rate * ga
                head.b -= config.learning_rate * gb
            train_hist.append(self._loss_from_tensor(ld_tr, cols_tr, head))
            val_loss = self._loss_from_tensor(ld_va, cols_va, head)
            val_hist.append(val_loss)
            if val_loss < stopper.best:
                best_a, best_b = head.a, head.b
            if stopper.update(val_loss):
                early_stopped = True
                break

        self.head = LogitHead(a=best_a, b=best_b, leaky_slope=head.leaky_slope, frozen=True)
        self.training_log = TrainingLog(
            train_loss=tuple(train_hist),
            val_loss=tuple(val_hist),
            best_epoch=stopper.best_epoch,
            epochs_run=epochs_run,
            early_stopped=early_stopped,
        )
        return self.head
