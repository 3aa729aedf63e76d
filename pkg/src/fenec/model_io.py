"""Model persistence: JSON header plus per-class FCOV/FCTR binary sections.

Layout (little-endian):

    magic    4 bytes  b"FENM"
    version  u8       currently 1
    hlen     u32      header length in bytes
    header   hlen     UTF-8 JSON (hyperparameters, seed, head, class list)
    sections          per class in ascending id: one FCOV then one FCTR

    FCOV: b"FCOV" u32 class_id  u32 n_features          f64 precision row-major
    FCTR: b"FCTR" u32 class_id  u32 k  u32 n_features   f64 centroids row-major
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .classifier import ClassState, FeNeC
from .clustering import CentroidSet
from .config import METHOD_FENEC_LOG, HyperParams
from .covariance import ClassCovariance
from .errors import CorruptionError, FormatError
from .logit_head import FeNeCLog, LogitHead

MODEL_MAGIC = b"FENM"
MODEL_VERSION = 1
_PREFIX = struct.Struct("<4sBI")
_FCOV_HEAD = struct.Struct("<4sII")
_FCTR_HEAD = struct.Struct("<4sIII")


def _header_dict(model: FeNeC) -> dict:
    head = None
    if isinstance(model, FeNeCLog) and model.head is not None:
        head = {
            "a": model.head.a,
            "b": model.head.b,
            "leaky_slope": model.head.leaky_slope,
            "frozen": model.head.frozen,
        }
    return {
        "format_version": MODEL_VERSION,
        "hyperparams": model.hyper.to_dict(),
        "seed": model.seed,
        "n_features": model.n_features,
        "tasks_fitted": model.tasks_fitted,
        "classes": list(model.classes),
        "head": head,
    }


def write_model(model: FeNeC, path) -> None:
    header = json.dumps(_header_dict(model), sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as fh:
        fh.write(_PREFIX.pack(MODEL_MAGIC, MODEL_VERSION, len(header)))
        fh.write(header)
        for class_id in model.classes:
            state = model.class_state(class_id)
            prec = np.ascontiguousarray(state.covariance.precision, dtype="<f8")
            fh.write(_FCOV_HEAD.pack(b"FCOV", class_id, prec.shape[0]))
            fh.write(prec.tobytes())
            cents = np.ascontiguousarray(state.centroids.centroids, dtype="<f8")
            fh.write(_FCTR_HEAD.pack(b"FCTR", class_id, cents.shape[0], cents.shape[1]))
            fh.write(cents.tobytes())


def read_model_header(path) -> dict:
    with open(path, "rb") as fh:
        prefix = fh.read(_PREFIX.size)
        if len(prefix) < _PREFIX.size:
            raise CorruptionError(f"{path}: file shorter than model prefix")
        magic, version, hlen = _PREFIX.unpack(prefix)
        if magic != MODEL_MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}, expected {MODEL_MAGIC!r}")
        if version != MODEL_VERSION:
            raise FormatError(f"{path}: unsupported model version {version}")
        raw = fh.read(hlen)
    if len(raw) < hlen:
        raise CorruptionError(f"{path}: truncated JSON header")
    try:
        return json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptionError(f"{path}: unreadable JSON header") from exc


def _take(buf: bytes, offset: int, size: int, path, what: str) -> tuple:
    if offset + size > len(buf):
        raise CorruptionError(f"{path}: truncated while reading {what}")
    return buf[offset : offset + size], offset + size


def load_model(path) -> FeNeC:
    with open(path, "rb") as fh:
        buf = fh.read()
    if len(buf) < _PREFIX.size:
        raise CorruptionError(f"{path}: file shorter than model prefix")
    magic, version, hlen = _PREFIX.unpack_from(buf)
    if magic != MODEL_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {MODEL_MAGIC!r}")
    if version != MODEL_VERSION:
        raise FormatError(f"{path}: unsupported model version {version}")
    raw, offset = _take(buf, _PREFIX.size, hlen, path, "JSON header")
    try:
        header = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptionError(f"{path}: unreadable JSON header") from exc

    hp = dict(header["hyperparams"])
    method = hp.pop("method")
    hyper = HyperParams.from_dict(hp, method=method)
    if method == METHOD_FENEC_LOG:
        model: FeNeC = FeNeCLog(hyper, seed=header["seed"])
        if header.get("head") is not None:
            h = header["head"]
            model.head = LogitHead(
                a=h["a"], b=h["b"], leaky_slope=h["leaky_slope"], frozen=h["frozen"]
            )
    else:
        model = FeNeC(hyper, seed=header["seed"])
    model.n_features = header["n_features"]
    model.tasks_fitted = header["tasks_fitted"]

    for class_id in header["classes"]:
        sec, offset = _take(buf, offset, _FCOV_HEAD.size, path, "FCOV header")
        tag, cid, nf = _FCOV_HEAD.unpack(sec)
        if tag != b"FCOV" or cid != class_id:
            raise CorruptionError(
                f"{path}: expected FCOV section for class {class_id}, found {tag!r}/{cid}"
            )
        raw, offset = _take(buf, offset, 8 * nf * nf, path, f"precision of class {cid}")
        precision = np.frombuffer(raw, dtype="<f8").reshape(nf, nf).copy()

        sec, offset = _take(buf, offset, _FCTR_HEAD.size, path, "FCTR header")
        tag, cid2, k, nf2 = _FCTR_HEAD.unpack(sec)
        if tag != b"FCTR" or cid2 != class_id or nf2 != nf:
            raise CorruptionError(
                f"{path}: malformed FCTR section for class {class_id}"
            )
        raw, offset = _take(buf, offset, 8 * k * nf, path, f"centroids of class {cid2}")
        centroids = np.frombuffer(raw, dtype="<f8").reshape(k, nf).copy()

        model._classes[class_id] = ClassState(
            ClassCovariance(class_id, precision, hyper.metric),
            CentroidSet(class_id, centroids),
        )
    if offset != len(buf):
        raise CorruptionError(f"{path}: {len(buf) - offset} trailing bytes after sections")
    return model
