"""Feature catalog: build, persist, and query by Euclidean distance.

The catalog is immutable after construction. Queries are exhaustive linear
scans over a dense float64 matrix; at the scales handled here (well under
1e5 entries) this is faster and easier to audit than any index structure.
Ties in distance are broken by insertion order, which a stable sort gives
for free.
"""

import json
import struct
from dataclasses import dataclass

import numpy as np

from ..encoders.network import FeatureVector
from ..errors import ConflictError, ShapeError, ValidationError

__all__ = [
    "PROVENANCES",
    "Catalog",
    "CatalogEntry",
    "RetrievalResult",
    "build_catalog",
    "load_catalog",
    "query",
    "save_catalog",
]

PROVENANCES = ("cad", "reconstructed", "scanned")

MAGIC = b"CAT1"


@dataclass(frozen=True)
class CatalogEntry:
    """One catalog row: a model's identity and its feature vector."""

    model_id: str
    class_label: str
    feature: FeatureVector
    provenance: str = "cad"

    def __post_init__(self):
        if not self.model_id:
            raise ValidationError("model_id must be nonempty")
        if self.provenance not in PROVENANCES:
            raise ValidationError(
                f"provenance must be one of {PROVENANCES}, got {self.provenance!r}"
            )


@dataclass(frozen=True)
class RetrievalResult:
    query_id: str
    ranked: tuple  # ((model_id, distance), ...) ascending

    def __post_init__(self):
        seen = set()
        prev = 0.0
        for model_id, dist in self.ranked:
            if model_id in seen:
                raise ValidationError(f"duplicate model_id in ranking: {model_id}")
            seen.add(model_id)
            if dist < prev:
                raise ValidationError("ranked distances must be nondecreasing")
            prev = dist

    @property
    def model_ids(self):
        return tuple(model_id for model_id, _ in self.ranked)


class Catalog:
    """Immutable feature catalog preserving insertion order."""

    def __init__(self, model_ids, class_labels, provenances, features, modality):
        self.model_ids = tuple(model_ids)
        self.class_labels = tuple(class_labels)
        self.provenances = tuple(provenances)
        self.features = np.ascontiguousarray(features, dtype=np.float64)
        self.modality = modality

    def __len__(self):
        return len(self.model_ids)

    @property
    def width(self):
        return self.features.shape[1]

    def class_of(self, model_id):
        return self.class_labels[self.model_ids.index(model_id)]


def build_catalog(entries):
    if not entries:
        raise ValidationError("catalog needs at least one entry")
    width = entries[0].feature.values.shape[0]
    modality = entries[0].feature.modality
    seen = set()
    rows = np.empty((len(entries), width), dtype=np.float64)
    for i, entry in enumerate(entries):
        if entry.model_id in seen:
            raise ConflictError(f"duplicate model_id: {entry.model_id}")
        seen.add(entry.model_id)
        if entry.feature.values.shape[0] != width:
            raise ShapeError(
                f"feature width {entry.feature.values.shape[0]} != {width} "
                f"(entry {entry.model_id})"
            )
        if entry.feature.modality != modality:
            raise ValidationError(
                f"mixed feature modalities: {entry.feature.modality} vs {modality}"
            )
        rows[i] = entry.feature.values
    return Catalog(
        [e.model_id for e in entries],
        [e.class_label for e in entries],
        [e.provenance for e in entries],
        rows,
        modality,
    )


def query(catalog, f, k, query_id="query"):
    """Top-k catalog entries nearest to ``f`` in Euclidean distance.

    k larger than the catalog returns everything; ties keep insertion order.
    """
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    if f.values.shape[0] != catalog.width:
        raise ShapeError(
            f"query width {f.values.shape[0]} != catalog width {catalog.width}"
        )
    if f.modality != catalog.modality:
        raise ValidationError(
            f"query modality {f.modality} != catalog modality {catalog.modality}"
        )
    diff = catalog.features - f.values[None, :]
    dists = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    order = np.argsort(dists, kind="stable")[: min(k, len(catalog))]
    ranked = tuple((catalog.model_ids[i], float(dists[i])) for i in order)
    return RetrievalResult(query_id=query_id, ranked=ranked)


def save_catalog(catalog, path):
    """Write header + packed rows to ``path`` and ids to a JSON sidecar."""
    header = {
        "format": 1,
        "width": int(catalog.width),
        "count": len(catalog),
        "dtype": "float64",
        "modality": catalog.modality,
    }
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(catalog.features.astype("<f8").tobytes())
    sidecar = {
        "model_ids": list(catalog.model_ids),
        "class_labels": list(catalog.class_labels),
        "provenance": list(catalog.provenances),
    }
    with open(str(path) + ".json", "w") as fh:
        json.dump(sidecar, fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_catalog(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != MAGIC:
        raise ValidationError(f"bad catalog magic: {raw[:4]!r}")
    (hlen,) = struct.unpack("<I", raw[4:8])
    try:
        header = json.loads(raw[8 : 8 + hlen])
    except (ValueError, UnicodeDecodeError) as exc:
        raise ValidationError(f"unreadable catalog header: {exc}") from None
    width, count = header["width"], header["count"]
    start = 8 + hlen
    expected = count * width * 8
    payload = raw[start : start + expected]
    if len(payload) != expected or len(raw) != start + expected:
        raise ValidationError("catalog payload size does not match header")
    features = np.frombuffer(payload, dtype="<f8").reshape(count, width)
    with open(str(path) + ".json") as fh:
        sidecar = json.load(fh)
    ids = sidecar["model_ids"]
    labels = sidecar["class_labels"]
    provs = sidecar["provenance"]
    if not (len(ids) == len(labels) == len(provs) == count):
        raise ValidationError("catalog sidecar length does not match header count")
    return Catalog(ids, labels, provs, features, header["modality"])
