"""Frozen feature extractors: ViT-B/16 (768-d) and ResNet-18 (512-d).

The ResNet-18 weights must come from a checkpoint trained on the first
task of the target stream; this package deliberately does not re-derive
that training recipe and instead pins the supplied checkpoint by checksum
in the export manifest. The ViT path expects ImageNet-21k pre-trained
weights supplied as a local checkpoint (``--weights``); without one it
falls back to torchvision's bundled ImageNet weights, which exist for
pipeline checks but do not reproduce the reference accuracy numbers.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import torch
import torch.nn as nn
import torchvision
from torchvision import transforms

from .fenc import ExportError

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)
CIFAR_MEAN = (0.5071, 0.4865, 0.4409)
CIFAR_STD = (0.2673, 0.2564, 0.2762)


@dataclass
class Backbone:
    name: str
    model: nn.Module
    n_features: int
    transform: object
    weights_sha256: str | None


def _file_sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _load_checkpoint(model: nn.Module, path) -> None:
    state = torch.load(path, map_location="cpu", weights_only=True)
    if isinstance(state, dict) and "state_dict" in state:
        state = state["state_dict"]
    missing, unexpected = model.load_state_dict(state, strict=False)
    head_keys = {"fc.weight", "fc.bias", "heads.head.weight", "heads.head.bias"}
    problems = [k for k in list(missing) + list(unexpected) if k not in head_keys]
    if problems:
        raise ExportError(f"checkpoint does not match the backbone: {problems[:5]}")


def _vit_transform(image_size: int = 224):
    return transforms.Compose(
        [
            transforms.Resize(256),
            transforms.CenterCrop(image_size),
            transforms.ToTensor(),
            transforms.Normalize(IMAGENET_MEAN, IMAGENET_STD),
        ]
    )


def _resnet_cifar_transform():
    # First-task ResNet-18 checkpoints for 32x32 inputs; no resizing.
    return transforms.Compose(
        [transforms.ToTensor(), transforms.Normalize(CIFAR_MEAN, CIFAR_STD)]
    )


def build_backbone(name: str, weights=None, dataset: str | None = None) -> Backbone:
    if name == "vit_b16":
        if weights is not None:
            model = torchvision.models.vit_b_16(weights=None)
            _load_checkpoint(model, weights)
            digest = _file_sha256(weights)
        else:
            model = torchvision.models.vit_b_16(
                weights=torchvision.models.ViT_B_16_Weights.IMAGENET1K_V1
            )
            digest = None
        model.heads = nn.Identity()
        backbone = Backbone(name, model, 768, _vit_transform(), digest)
    elif name == "resnet18":
        if weights is None:
            raise ExportError(
                "resnet18 exports need --weights pointing at a first-task checkpoint"
            )
        model = torchvision.models.resnet18(weights=None)
        _load_checkpoint(model, weights)
        model.fc = nn.Identity()
        transform = (
            _resnet_cifar_transform() if dataset == "cifar100" else _vit_transform(224)
        )
        backbone = Backbone(name, model, 512, transform, _file_sha256(weights))
    else:
        raise ExportError(f"unknown backbone {name!r}; expected vit_b16 or resnet18")
    backbone.model.eval()
    for param in backbone.model.parameters():
        param.requires_grad_(False)
    return backbone
