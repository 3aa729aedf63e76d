"""Feature-export pipeline: backbone inference to FENC + split + manifest."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field

import numpy as np
import torch
from torch.utils.data import DataLoader

from .backbones import build_backbone
from .datasets import load_datasets
from .fenc import ExportError, write_fenc, write_split
from .splits import ordered_split, task_scheme


class NondeterminismError(ExportError):
    """Re-exporting with the same seed produced different file contents."""


@dataclass
class ExportManifest:
    dataset: str
    backbone: str
    n_features: int
    class_order_seed: int
    files: dict = field(default_factory=dict)
    weights_sha256: str | None = None

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "backbone": self.backbone,
            "n_features": self.n_features,
            "class_order_seed": self.class_order_seed,
            "files": dict(sorted(self.files.items())),
            "weights_sha256": self.weights_sha256,
        }


def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


@torch.no_grad()
def extract_features(model, dataset, n_features: int, batch_size: int = 256, device="cpu"):
    """Run the frozen extractor over a dataset in a fixed, single-threaded order."""
    model = model.to(device).eval()
    loader = DataLoader(dataset, batch_size=batch_size, shuffle=False, num_workers=0)
    feats, labels = [], []
    for images, targets in loader:
        out = model(images.to(device))
        if out.ndim != 2 or out.shape[1] != n_features:
            raise ExportError(
                f"extractor emitted shape {tuple(out.shape)}, expected (*, {n_features})"
            )
        feats.append(out.cpu().numpy().astype(np.float32))
        labels.append(np.asarray(targets, dtype=np.int64))
    if not feats:
        raise ExportError("dataset is empty")
    return np.vstack(feats), np.concatenate(labels)


def run_export(
    train_ds,
    test_ds,
    model,
    n_features: int,
    scheme,
    n_classes: int,
    out_dir,
    class_order_seed: int,
    dataset_name: str,
    backbone_name: str,
    weights_sha256: str | None = None,
    batch_size: int = 256,
    device: str = "cpu",
) -> ExportManifest:
    """Extract features for both partitions and emit FENC + split + manifest.

    If a manifest from a previous export with the same dataset, backbone and
    seed already exists in ``out_dir``, the new checksums must match it;
    a mismatch means the pipeline is not deterministic and raises.
    """
    os.makedirs(out_dir, exist_ok=True)
    stem = f"{dataset_name}_{backbone_name}"
    names = {
        "train": f"{stem}_train.fenc",
        "test": f"{stem}_test.fenc",
        "split": f"{stem}_split_order{class_order_seed}.json",
    }

    train_x, train_y = extract_features(model, train_ds, n_features, batch_size, device)
    test_x, test_y = extract_features(model, test_ds, n_features, batch_size, device)
    write_fenc(os.path.join(out_dir, names["train"]), train_x, train_y)
    write_fenc(os.path.join(out_dir, names["test"]), test_x, test_y)
    write_split(
        os.path.join(out_dir, names["split"]),
        ordered_split(n_classes, scheme, class_order_seed),
    )

    manifest = ExportManifest(
        dataset=dataset_name,
        backbone=backbone_name,
        n_features=n_features,
        class_order_seed=class_order_seed,
        files={name: _sha256(os.path.join(out_dir, name)) for name in names.values()},
        weights_sha256=weights_sha256,
    )

    manifest_path = os.path.join(out_dir, "manifest.json")
    if os.path.exists(manifest_path):
        with open(manifest_path, "r", encoding="utf-8") as fh:
            previous = json.load(fh)
        same_setup = (
            previous.get("dataset") == dataset_name
            and previous.get("backbone") == backbone_name
            and previous.get("class_order_seed") == class_order_seed
        )
        if same_setup and previous.get("files") != manifest.to_dict()["files"]:
            raise NondeterminismError(
                "re-export with the same seed changed file checksums; "
                "the extraction pipeline is not deterministic"
            )
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def export_features(
    dataset: str,
    backbone: str,
    out_dir,
    class_order_seed: int,
    data_root: str = "data",
    weights=None,
    download: bool = False,
    batch_size: int = 256,
    device: str = "cpu",
) -> ExportManifest:
    """Resolve a benchmark setup and export its feature files."""
    scheme = task_scheme(dataset, backbone)
    bb = build_backbone(backbone, weights=weights, dataset=dataset)
    train_ds, test_ds, n_classes = load_datasets(
        dataset, data_root, bb.transform, download=download
    )
    return run_export(
        train_ds,
        test_ds,
        bb.model,
        bb.n_features,
        scheme,
        n_classes,
        out_dir,
        class_order_seed,
        dataset_name=dataset,
        backbone_name=backbone,
        weights_sha256=bb.weights_sha256,
        batch_size=batch_size,
        device=device,
    )
