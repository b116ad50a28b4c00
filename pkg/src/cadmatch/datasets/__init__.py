"""Manifests, splits, corpus adapters, and the desk-scale dataset builder."""

from .adapters import EXPECTED_MCB_COUNTS, adapt_mcb, adapt_tless, make_desk_dataset
from .manifest import (
    HEADER,
    Manifest,
    ManifestRow,
    load_manifest,
    save_manifest,
    stratified_split,
)

__all__ = [
    "EXPECTED_MCB_COUNTS",
    "HEADER",
    "Manifest",
    "ManifestRow",
    "adapt_mcb",
    "adapt_tless",
    "load_manifest",
    "make_desk_dataset",
    "save_manifest",
    "stratified_split",
]
