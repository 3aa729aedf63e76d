"""Benchmark dataset loaders.

CIFAR-100 comes from torchvision (optionally downloaded); the ImageNet
derivatives must already exist on disk as ImageFolder trees with one
subdirectory per class, ``train/`` and ``test`` (or ``val``) at the root.
"""

from __future__ import annotations

import os

from torchvision import datasets

from .fenc import ExportError

N_CLASSES = {
    "cifar100": 100,
    "tiny_imagenet": 200,
    "imagenet_subset": 100,
    "imagenet_r": 200,
}


def load_datasets(dataset: str, root: str, transform, download: bool = False):
    """Return ``(train_ds, test_ds, n_classes)`` for a benchmark name."""
    if dataset == "cifar100":
        train = datasets.CIFAR100(root, train=True, transform=transform, download=download)
        test = datasets.CIFAR100(root, train=False, transform=transform, download=download)
        return train, test, N_CLASSES[dataset]
    if dataset in ("tiny_imagenet", "imagenet_subset", "imagenet_r"):
        base = os.path.join(root, dataset)
        test_dir = os.path.join(base, "test")
        if not os.path.isdir(test_dir):
            test_dir = os.path.join(base, "val")
        train_dir = os.path.join(base, "train")
        if not (os.path.isdir(train_dir) and os.path.isdir(test_dir)):
            raise ExportError(
                f"{dataset} must be laid out as {base}/train and {base}/test (or val)"
            )
        train = datasets.ImageFolder(train_dir, transform=transform)
        test = datasets.ImageFolder(test_dir, transform=transform)
        expected = N_CLASSES[dataset]
        if len(train.classes) != expected:
            raise ExportError(
                f"{dataset}: found {len(train.classes)} classes, expected {expected}"
            )
        return train, test, expected
    raise ExportError(f"unknown dataset {dataset!r}; expected one of {sorted(N_CLASSES)}")
