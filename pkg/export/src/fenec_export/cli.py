"""Command line for one-shot feature exports."""

from __future__ import annotations

import argparse
import sys

from .export import ExportError, export_features


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fenec-export",
        description="Run a frozen backbone over a benchmark dataset and emit "
        "FENC feature files, a task split, and a checksum manifest.",
    )
    parser.add_argument(
        "--dataset",
        required=True,
        choices=["cifar100", "tiny_imagenet", "imagenet_subset", "imagenet_r"],
    )
    parser.add_argument("--backbone", required=True, choices=["vit_b16", "resnet18"])
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--order-seed", type=int, default=0, help="class-order seed")
    parser.add_argument("--data-root", default="data", help="dataset root directory")
    parser.add_argument(
        "--weights",
        default=None,
        help="backbone checkpoint (required for resnet18; 21k-pretrained for vit_b16)",
    )
    parser.add_argument("--download", action="store_true", help="download CIFAR-100 if absent")
    parser.add_argument("--batch-size", type=int, default=256)
    parser.add_argument("--device", default="cpu")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        manifest = export_features(
            dataset=args.dataset,
            backbone=args.backbone,
            out_dir=args.out,
            class_order_seed=args.order_seed,
            data_root=args.data_root,
            weights=args.weights,
            download=args.download,
            batch_size=args.batch_size,
            device=args.device,
        )
    except ExportError as exc:
        print(f"export failed: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"missing file: {exc.filename or exc}", file=sys.stderr)
        return 1
    print(f"exported {manifest.dataset}/{manifest.backbone} -> {args.out}", file=sys.stderr)
    return 0


def entrypoint() -> None:
    sys.exit(main())
