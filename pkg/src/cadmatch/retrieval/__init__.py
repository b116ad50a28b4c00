"""Catalog construction, nearest-neighbor query, and match analytics."""

from .catalog import (
    PROVENANCES,
    Catalog,
    CatalogEntry,
    RetrievalResult,
    build_catalog,
    load_catalog,
    query,
    save_catalog,
)
from .distances import (
    DistanceTable,
    calibrate_threshold,
    match_decision,
    pairwise_distances,
)

__all__ = [
    "PROVENANCES",
    "Catalog",
    "CatalogEntry",
    "DistanceTable",
    "RetrievalResult",
    "build_catalog",
    "calibrate_threshold",
    "load_catalog",
    "match_decision",
    "pairwise_distances",
    "query",
    "save_catalog",
]
