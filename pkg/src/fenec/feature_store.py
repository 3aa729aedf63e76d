"""Feature dataset loading and class-incremental task partitioning.

Feature files use the FENC binary layout (all integers little-endian):

    magic   4 bytes  b"FENC"
    version u8       currently 1
    n       u32      number of samples
    f       u32      number of features
    payload n*f f32  feature matrix, row-major
    labels  n   u32  per-row class id

Task splits are JSON arrays of arrays of class ids, one inner array per
task, e.g. ``[[0, 1, 2], [3, 4], [5]]``.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    CorruptionError,
    CoverageError,
    DataError,
    FormatError,
    ShapeError,
    SplitError,
)

FENC_MAGIC = b"FENC"
FENC_VERSION = 1
_HEADER = struct.Struct("<4sBII")


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class FeatureBatch:
    """A matrix of feature vectors with one integer class label per row.

    Features are held in float32 (the storage dtype); numerical pipelines
    promote to float64 at their own boundary. Instances are immutable and
    safe to share across threads.
    """

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self) -> None:
        feats = np.ascontiguousarray(self.features, dtype=np.float32)
        labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        if feats.ndim != 2:
            raise ShapeError(f"features must be 2-D, got ndim={feats.ndim}")
        if labels.ndim != 1:
            raise ShapeError(f"labels must be 1-D, got ndim={labels.ndim}")
        if feats.shape[0] != labels.shape[0]:
            raise ShapeError(
                f"row mismatch: {feats.shape[0]} feature rows vs {labels.shape[0]} labels"
            )
        if feats.shape[1] == 0:
            raise DataError("feature dimension must be positive")
        if not np.isfinite(feats).all():
            raise DataError("features contain non-finite values")
        if labels.size and labels.min() < 0:
            raise DataError("labels must be non-negative")
        object.__setattr__(self, "features", _freeze(feats))
        object.__setattr__(self, "labels", _freeze(labels))

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def classes(self) -> np.ndarray:
        """Sorted unique class ids present in this batch."""
        return np.unique(self.labels)

    def select(self, class_ids) -> "FeatureBatch":
        """Rows whose label is in ``class_ids``, original order preserved."""
        mask = np.isin(self.labels, np.asarray(sorted(class_ids), dtype=np.int64))
        return FeatureBatch(self.features[mask], self.labels[mask])


@dataclass(frozen=True)
class Task:
    train: FeatureBatch
    test: FeatureBatch
    classes: frozenset


@dataclass(frozen=True)
class TaskStream:
    """Ordered partition of classes into tasks with per-task train/test data.

    ``tasks[t].test`` holds the cumulative test rows for classes introduced
    up to and including task t (the class-incremental evaluation batch).
    """

    tasks: tuple = field(default_factory=tuple)
    cumulative_classes: tuple = field(default_factory=tuple)

    @property
    def n_tasks(self) -> int:
        return len(self.tasks)


def read_fenc_header(path) -> tuple:
    """Return ``(n_samples, n_features)`` without loading the payload."""
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
    if len(head) < _HEADER.size:
        raise CorruptionError(f"{path}: file shorter than FENC header")
    magic, version, n_samples, n_features = _HEADER.unpack(head)
    if magic != FENC_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {FENC_MAGIC!r}")
    if version != FENC_VERSION:
        raise FormatError(f"{path}: unsupported FENC version {version}")
    return n_samples, n_features


def load_feature_file(path) -> FeatureBatch:
    """Load and validate one FENC feature file."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise CorruptionError(f"{path}: file shorter than FENC header")
    magic, version, n_samples, n_features = _HEADER.unpack_from(raw)
    if magic != FENC_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {FENC_MAGIC!r}")
    if version != FENC_VERSION:
        raise FormatError(f"{path}: unsupported FENC version {version}")
    if n_features == 0:
        raise DataError(f"{path}: header declares zero features")
    expected = _HEADER.size + 4 * n_samples * n_features + 4 * n_samples
    if len(raw) != expected:
        raise CorruptionError(
            f"{path}: payload size mismatch, header implies {expected} bytes, file has {len(raw)}"
        )
    offset = _HEADER.size
    feats = np.frombuffer(raw, dtype="<f4", count=n_samples * n_features, offset=offset)
    feats = feats.reshape(n_samples, n_features)
    offset += 4 * n_samples * n_features
    labels = np.frombuffer(raw, dtype="<u4", count=n_samples, offset=offset)
    if not np.isfinite(feats).all():
        raise DataError(f"{path}: features contain non-finite values")
    return FeatureBatch(feats, labels.astype(np.int64))


def write_feature_file(batch: FeatureBatch, path) -> None:
    """Serialize a batch to FENC; loading the result round-trips exactly."""
    labels = batch.labels
    if labels.size and labels.max() >= 2**32:
        raise DataError("labels exceed the u32 range of the FENC format")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(FENC_MAGIC, FENC_VERSION, batch.n_samples, batch.n_features))
        fh.write(np.ascontiguousarray(batch.features, dtype="<f4").tobytes())
        fh.write(np.ascontiguousarray(labels, dtype="<u4").tobytes())


def load_split(path) -> list:
    """Load a task split file: a JSON array of arrays of class ids."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, list) or not raw:
        raise SplitError(f"{path}: split must be a non-empty JSON array of arrays")
    split = []
    for i, group in enumerate(raw):
        if not isinstance(group, list) or not group:
            raise SplitError(f"{path}: task {i} must be a non-empty array of class ids")
        if not all(isinstance(c, int) and c >= 0 for c in group):
            raise SplitError(f"{path}: task {i} contains a non-integer or negative class id")
        split.append(list(group))
    return split


def build_task_stream(train: FeatureBatch, test: FeatureBatch, split) -> TaskStream:
    """Partition train/test batches into a class-incremental task stream.

    ``split`` is an ordered list of class-id lists. Task t's train batch
    holds exactly the train rows labelled with ``split[t]``; its test batch
    holds the test rows labelled with any class from ``split[0..t]``.
    """
    if train.n_features != test.n_features:
        raise ShapeError(
            f"train has {train.n_features} features but test has {test.n_features}"
        )
    seen: set = set()
    task_sets = []
    for i, group in enumerate(split):
        group_set = set(int(c) for c in group)
        if len(group_set) != len(group):
            raise SplitError(f"task {i} lists a class id twice")
        overlap = seen & group_set
        if overlap:
            raise SplitError(f"task {i} re-uses classes {sorted(overlap)}")
        seen |= group_set
        task_sets.append(frozenset(group_set))

    present = set(np.unique(train.labels).tolist()) | set(np.unique(test.labels).tolist())
    uncovered = present - seen
    if uncovered:
        raise CoverageError(f"labels {sorted(uncovered)} are not covered by the split")

    tasks = []
    cumulative = []
    prefix: set = set()
    for group_set in task_sets:
        prefix |= group_set
        cumulative.append(frozenset(prefix))
        tasks.append(
            Task(
                train=train.select(group_set),
                test=test.select(prefix),
                classes=group_set,
            )
        )
    return TaskStream(tasks=tuple(tasks), cumulative_classes=tuple(cumulative))
