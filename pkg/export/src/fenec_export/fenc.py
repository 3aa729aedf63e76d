"""Writers for the wire formats the classifier CLI consumes.

FENC feature file (little-endian): magic ``FENC``, u8 version = 1,
u32 n_samples, u32 n_features, float32 features row-major, u32 labels.
Task splits are JSON arrays of arrays of class ids.
"""

from __future__ import annotations

import json
import struct

import numpy as np

FENC_MAGIC = b"FENC"
FENC_VERSION = 1
_HEADER = struct.Struct("<4sBII")


class ExportError(Exception):
    pass


def write_fenc(path, features: np.ndarray, labels: np.ndarray) -> None:
    features = np.ascontiguousarray(features, dtype="<f4")
    labels = np.ascontiguousarray(labels, dtype="<u4")
    if features.ndim != 2 or features.shape[1] == 0:
        raise ExportError(f"features must be a non-empty 2-D matrix, got {features.shape}")
    if labels.shape != (features.shape[0],):
        raise ExportError(
            f"need one label per row: {features.shape[0]} rows, {labels.shape} labels"
        )
    if not np.isfinite(features).all():
        raise ExportError("refusing to write non-finite feature values")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(FENC_MAGIC, FENC_VERSION, features.shape[0], features.shape[1]))
        fh.write(features.tobytes())
        fh.write(labels.tobytes())


def write_split(path, split) -> None:
    groups = [sorted(int(c) for c in group) for group in split]
    seen: set = set()
    for group in groups:
        if not group:
            raise ExportError("split contains an empty task")
        overlap = seen & set(group)
        if overlap:
            raise ExportError(f"split re-uses classes {sorted(overlap)}")
        seen |= set(group)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(groups, fh, separators=(",", ":"))
        fh.write("\n")
