"""Dataset manifests: a diffable CSV of rows plus a JSON class inventory.

CSV header: model_id,class_label,mesh_path,split,provenance
Mesh paths are stored as written and resolved against the manifest's
directory when relative, so a dataset folder can be moved wholesale.
"""

import csv
import json
import os
from dataclasses import dataclass, replace

import numpy as np

from ..errors import DegenerateDatasetError, ManifestError

__all__ = ["HEADER", "Manifest", "ManifestRow", "load_manifest", "save_manifest",
           "stratified_split"]

HEADER = ["model_id", "class_label", "mesh_path", "split", "provenance"]

SPLITS = ("train", "test")
ROW_PROVENANCES = ("cad", "reconstructed", "scanned")


@dataclass(frozen=True)
class ManifestRow:
    model_id: str
    class_label: str
    mesh_path: str
    split: str = "train"
    provenance: str = "cad"


class Manifest:
    """Validated, ordered collection of dataset rows."""

    def __init__(self, rows, root="."):
        seen = {}
        for n, row in enumerate(rows, start=1):
            if row.model_id in seen:
                raise ManifestError(
                    f"duplicate model_id {row.model_id!r} in rows "
                    f"{seen[row.model_id]} and {n}"
                )
            seen[row.model_id] = n
            if row.split not in SPLITS:
                raise ManifestError(
                    f"row {n}: split must be one of {SPLITS}, got {row.split!r}"
                )
            if row.provenance not in ROW_PROVENANCES:
                raise ManifestError(
                    f"row {n}: provenance must be one of {ROW_PROVENANCES}, "
                    f"got {row.provenance!r}"
                )
        self.rows = tuple(rows)
        self.root = root

    def __len__(self):
        return len(self.rows)

    def resolve(self, row):
        if os.path.isabs(row.mesh_path):
            return row.mesh_path
        return os.path.join(self.root, row.mesh_path)

    @property
    def class_counts(self):
        counts = {}
        for row in self.rows:
            counts[row.class_label] = counts.get(row.class_label, 0) + 1
        return counts

    @property
    def classes(self):
        return tuple(sorted(self.class_counts))

    def subset(self, split):
        return tuple(r for r in self.rows if r.split == split)


def load_manifest(path):
    if not os.path.exists(path):
        raise ManifestError(f"manifest not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ManifestError("manifest is empty") from None
        if header != HEADER:
            raise ManifestError(f"bad header {header}, expected {HEADER}")
        rows = []
        for n, record in enumerate(reader, start=1):
            if len(record) != len(HEADER):
                raise ManifestError(f"row {n}: expected {len(HEADER)} fields")
            rows.append(ManifestRow(*record))
    manifest = Manifest(rows, root=os.path.dirname(os.path.abspath(path)))
    for n, row in enumerate(manifest.rows, start=1):
        if not os.path.exists(manifest.resolve(row)):
            raise ManifestError(f"row {n}: mesh path does not exist: {row.mesh_path}")
    sidecar = str(path) + ".json"
    if os.path.exists(sidecar):
        with open(sidecar) as fh:
            inventory = json.load(fh).get("classes", {})
        if inventory != manifest.class_counts:
            raise ManifestError(
                f"class inventory sidecar disagrees with rows: "
                f"{inventory} != {manifest.class_counts}"
            )
    return manifest


def save_manifest(manifest, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(HEADER)
        for row in manifest.rows:
            writer.writerow(
                [row.model_id, row.class_label, row.mesh_path, row.split,
                 row.provenance]
            )
    with open(str(path) + ".json", "w") as fh:
        json.dump({"classes": manifest.class_counts}, fh, sort_keys=True, indent=1)
        fh.write("\n")


def stratified_split(manifest, train_fraction, seed):
    """Reassign split tags per class, within one model of the target fraction.

    Both sides stay nonempty for every class, so fractions are clipped
    rather than letting a small class land entirely in one split.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ManifestError("train_fraction must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    assignment = {}
    for label in sorted(manifest.class_counts):
        members = [r.model_id for r in manifest.rows if r.class_label == label]
        if len(members) < 2:
            raise DegenerateDatasetError(
                f"class {label!r} has {len(members)} model(s); need at least 2 to split"
            )
        order = rng.permutation(len(members))
        n_train = int(np.clip(round(train_fraction * len(members)), 1,
                              len(members) - 1))
        for pos, idx in enumerate(order):
            assignment[members[idx]] = "train" if pos < n_train else "test"
    rows = [replace(r, split=assignment[r.model_id]) for r in manifest.rows]
    return Manifest(rows, root=manifest.root)
