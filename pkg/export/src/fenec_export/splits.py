"""Benchmark task-partition schemes and seeded class orders."""

from __future__ import annotations

import numpy as np

from .fenc import ExportError

# Task sizes per (dataset, backbone) setup: the ResNet setups use a large
# first task, the ViT setups use equally sized tasks.
SCHEMES = {
    ("cifar100", "resnet18"): [50, 10, 10, 10, 10, 10],
    ("cifar100", "vit_b16"): [10] * 10,
    ("tiny_imagenet", "resnet18"): [100, 20, 20, 20, 20, 20],
    ("imagenet_subset", "resnet18"): [50, 10, 10, 10, 10, 10],
    ("imagenet_r", "vit_b16"): [20] * 10,
}


def task_scheme(dataset: str, backbone: str) -> list:
    try:
        return list(SCHEMES[(dataset, backbone)])
    except KeyError:
        raise ExportError(
            f"no task scheme for dataset {dataset!r} with backbone {backbone!r}; "
            f"known setups: {sorted(SCHEMES)}"
        ) from None


def ordered_split(n_classes: int, sizes, order_seed: int) -> list:
    """Partition a seeded permutation of all classes into tasks of ``sizes``."""
    if sum(sizes) != n_classes:
        raise ExportError(
            f"scheme covers {sum(sizes)} classes but the dataset has {n_classes}"
        )
    order = np.random.default_rng(order_seed).permutation(n_classes)
    split, start = [], 0
    for size in sizes:
        split.append([int(c) for c in order[start : start + size]])
        start += size
    return split
