import json
import shutil
import struct
import subprocess

import numpy as np
import pytest
import torch
import torch.nn as nn
from torch.utils.data import Dataset

from fenec_export import (
    ExportError,
    NondeterminismError,
    ordered_split,
    run_export,
    task_scheme,
    write_fenc,
    write_split,
)


class ArrayDataset(Dataset):
    def __init__(self, images, labels):
        self.images = images
        self.labels = labels

    def __len__(self):
        return len(self.labels)

    def __getitem__(self, idx):
        return self.images[idx], int(self.labels[idx])


class StubExtractor(nn.Module):
    """Deterministic linear map standing in for a frozen backbone."""

    def __init__(self, in_dim, out_dim):
        super().__init__()
        gen = torch.Generator().manual_seed(7)
        self.register_buffer("weight", torch.randn(in_dim, out_dim, generator=gen))

    def forward(self, x):
        return x.reshape(x.shape[0], -1) @ self.weight


def synthetic_setup(n_classes=6, per_class=12, in_dim=10, out_dim=8, seed=0):
    rng = np.random.default_rng(seed)
    images, labels = [], []
    for c in range(n_classes):
        block = rng.normal(c, 0.3, size=(per_class, in_dim)).astype(np.float32)
        images.append(torch.from_numpy(block))
        labels.extend([c] * per_class)
    train = ArrayDataset(torch.cat(images), np.array(labels))
    test = ArrayDataset(torch.cat(images)[::3].clone(), np.array(labels)[::3])
    return train, test, StubExtractor(in_dim, out_dim), out_dim


def read_fenc(path):
    raw = path.read_bytes()
    magic, version, n, f = struct.unpack_from("<4sBII", raw)
    assert magic == b"FENC" and version == 1
    feats = np.frombuffer(raw, dtype="<f4", count=n * f, offset=13).reshape(n, f)
    labels = np.frombuffer(raw, dtype="<u4", count=n, offset=13 + 4 * n * f)
    assert len(raw) == 13 + 4 * n * f + 4 * n
    return feats, labels


def do_export(tmp_path, seed=3, out="out", scheme=(2, 2, 2)):
    train, test, model, dim = synthetic_setup()
    return run_export(
        train,
        test,
        model,
        dim,
        list(scheme),
        n_classes=6,
        out_dir=tmp_path / out,
        class_order_seed=seed,
        dataset_name="synthetic",
        backbone_name="stub",
        batch_size=16,
    )


class TestPipeline:
    def test_emits_wellformed_files_and_manifest(self, tmp_path):
        manifest = do_export(tmp_path)
        out = tmp_path / "out"
        feats, labels = read_fenc(out / "synthetic_stub_train.fenc")
        assert feats.shape == (72, 8)
        assert set(labels.tolist()) == set(range(6))
        assert manifest.n_features == feats.shape[1]

        split = json.loads((out / "synthetic_stub_split_order3.json").read_text())
        assert [len(g) for g in split] == [2, 2, 2]
        assert sorted(c for g in split for c in g) == list(range(6))

        recorded = json.loads((out / "manifest.json").read_text())
        assert recorded["class_order_seed"] == 3
        import hashlib

        for name, digest in recorded["files"].items():
            assert hashlib.sha256((out / name).read_bytes()).hexdigest() == digest

    def test_reexport_same_seed_is_checksum_identical(self, tmp_path):
        first = do_export(tmp_path, out="a")
        second = do_export(tmp_path, out="b")
        assert first.files == second.files
        # Re-export into the same directory validates against the manifest.
        do_export(tmp_path, out="a")

    def test_tampered_pipeline_raises_nondeterminism_error(self, tmp_path):
        do_export(tmp_path, out="a")
        manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
        manifest["files"]["synthetic_stub_train.fenc"] = "0" * 64
        (tmp_path / "a" / "manifest.json").write_text(json.dumps(manifest))
        with pytest.raises(NondeterminismError):
            do_export(tmp_path, out="a")

    def test_different_order_seeds_permute_classes(self, tmp_path):
        a = ordered_split(100, [50, 10, 10, 10, 10, 10], 0)
        b = ordered_split(100, [50, 10, 10, 10, 10, 10], 1)
        assert sorted(c for g in a for c in g) == list(range(100))
        assert a != b

    def test_extractor_feature_dim_is_enforced(self, tmp_path):
        train, test, model, _ = synthetic_setup()
        with pytest.raises(ExportError, match="expected"):
            run_export(
                train, test, model, 99, [2, 2, 2], 6, tmp_path / "x", 0, "s", "b"
            )


class TestSchemes:
    def test_reference_schemes(self):
        assert task_scheme("cifar100", "vit_b16") == [10] * 10
        assert task_scheme("cifar100", "resnet18") == [50, 10, 10, 10, 10, 10]
        assert task_scheme("tiny_imagenet", "resnet18") == [100, 20, 20, 20, 20, 20]
        assert task_scheme("imagenet_r", "vit_b16") == [20] * 10
        with pytest.raises(ExportError):
            task_scheme("cifar100", "unknown")

    def test_scheme_must_cover_all_classes(self):
        with pytest.raises(ExportError):
            ordered_split(99, [50, 10, 10, 10, 10, 10], 0)


class TestWriters:
    def test_split_writer_rejects_overlap(self, tmp_path):
        with pytest.raises(ExportError):
            write_split(tmp_path / "s.json", [[0, 1], [1, 2]])

    def test_fenc_writer_rejects_nan(self, tmp_path):
        with pytest.raises(ExportError):
            write_fenc(tmp_path / "x.fenc", np.array([[np.nan]]), np.array([0]))


@pytest.mark.skipif(shutil.which("fenec") is None, reason="classifier CLI not installed")
class TestClassifierCliIntegration:
    def test_exported_files_run_through_the_classifier(self, tmp_path):
        do_export(tmp_path, seed=0, out="feat")
        config = {
            "method": "fenec",
            "train_features": "feat/synthetic_stub_train.fenc",
            "test_features": "feat/synthetic_stub_test.fenc",
            "splits": ["feat/synthetic_stub_split_order0.json"],
            "seeds": [0],
            "hyperparams": {"n_clusters": 2, "n_neighbors": 2, "gamma1": 1.0, "gamma2": 0.5},
        }
        cfg = tmp_path / "config.json"
        cfg.write_text(json.dumps(config))
        out = tmp_path / "results"
        proc = subprocess.run(
            ["fenec", "run", "--config", str(cfg), "--out", str(out)],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0, proc.stderr
        report = json.loads((out / "report_0.json").read_text())
        assert len(report["per_task_accuracy"]) == 3
        assert report["last_task_accuracy"] > 0.9
