"""Frozen-backbone feature export for the fenec classifier CLI."""

from .backbones import Backbone, build_backbone
from .export import ExportManifest, NondeterminismError, export_features, run_export
from .fenc import ExportError, write_fenc, write_split
from .splits import SCHEMES, ordered_split, task_scheme

__all__ = [
    "Backbone",
    "ExportError",
    "ExportManifest",
    "NondeterminismError",
    "SCHEMES",
    "build_backbone",
    "export_features",
    "ordered_split",
    "run_export",
    "task_scheme",
    "write_fenc",
    "write_split",
]
