"""Adapters for external corpus layouts and the procedural desk dataset.

MCB layout: one folder per class under the root, OBJ files inside.
T-LESS layout: root/cad/*.obj and root/reconstructed/*.obj, paired by stem.
"""

import os
import warnings

import numpy as np

from ..errors import DatasetWarning, ManifestError
from ..geometry import gen_procedural, generator_classes, write_obj
from .manifest import Manifest, ManifestRow, save_manifest

__all__ = ["EXPECTED_MCB_COUNTS", "adapt_mcb", "adapt_tless", "make_desk_dataset"]

# published per-class inventory of the 25-class mechanical components
# benchmark (variant B); local copies drift, so differences only warn
EXPECTED_MCB_COUNTS = {
    "bearings": 1117,
    "bushes": 592,
    "castors": 1109,
    "clamps": 157,
    "discs": 109,
    "fittings": 1756,
    "flanges": 398,
    "fork_joints": 47,
    "gears": 515,
    "handles": 1751,
    "hinges": 61,
    "hooks": 122,
    "motors": 746,
    "nuts": 1069,
    "pins": 2659,
    "plates": 366,
    "pullies": 312,
    "rings": 551,
    "rivets": 51,
    "rotors": 470,
    "screws": 3661,
    "springs": 348,
    "studs": 352,
    "switches": 177,
    "washers": 880,
}


def _obj_files(folder):
    return sorted(f for f in os.listdir(folder) if f.lower().endswith(".obj"))


def adapt_mcb(root):
    """Build a Manifest from a class-per-folder CAD corpus."""
    if not os.path.isdir(root):
        raise ManifestError(f"not a directory: {root}")
    class_dirs = sorted(
        d for d in os.listdir(root) if os.path.isdir(os.path.join(root, d))
    )
    if not class_dirs:
        raise ManifestError(f"no class folders under {root}")
    rows = []
    for label in class_dirs:
        files = _obj_files(os.path.join(root, label))
        if not files:
            raise ManifestError(f"class folder {label!r} contains no OBJ files")
        key = label.lower().replace(" ", "_")
        if key in EXPECTED_MCB_COUNTS and len(files) != EXPECTED_MCB_COUNTS[key]:
            warnings.warn(
                f"class {label!r} has {len(files)} models, published inventory "
                f"says {EXPECTED_MCB_COUNTS[key]}",
                DatasetWarning,
                stacklevel=2,
            )
        for fname in files:
            stem = os.path.splitext(fname)[0]
            rows.append(
                ManifestRow(
                    model_id=f"{label}/{stem}",
                    class_label=label,
                    mesh_path=os.path.join(label, fname),
                )
            )
    return Manifest(rows, root=root)


def adapt_tless(root):
    """Build a Manifest plus the cad-to-reconstructed pairing map.

    Returns (manifest, pairs) where pairs maps reconstructed model_id to
    its CAD counterpart. Objects present on only one side stay in the
    manifest but are excluded from the pairing map, with a warning naming
    them so the exclusion is auditable.
    """
    cad_dir = os.path.join(root, "cad")
    rec_dir = os.path.join(root, "reconstructed")
    if not (os.path.isdir(cad_dir) and os.path.isdir(rec_dir)):
        raise ManifestError(f"{root} needs cad/ and reconstructed/ subfolders")
    cad = {os.path.splitext(f)[0]: f for f in _obj_files(cad_dir)}
    rec = {os.path.splitext(f)[0]: f for f in _obj_files(rec_dir)}
    if not cad or not rec:
        raise ManifestError("cad/ and reconstructed/ must both contain OBJ files")

    rows = []
    for stem in sorted(cad):
        rows.append(
            ManifestRow(
                model_id=f"cad/{stem}",
                class_label=stem,
                mesh_path=os.path.join("cad", cad[stem]),
                provenance="cad",
            )
        )
    for stem in sorted(rec):
        rows.append(
            ManifestRow(
                model_id=f"reconstructed/{stem}",
                class_label=stem,
                mesh_path=os.path.join("reconstructed", rec[stem]),
                split="test",
                provenance="reconstructed",
            )
        )
    unpaired = sorted(set(cad) ^ set(rec))
    if unpaired:
        warnings.warn(
            f"{len(unpaired)} object(s) lack a counterpart and are excluded "
            f"from retrieval truth: {', '.join(unpaired)}",
            DatasetWarning,
            stacklevel=2,
        )
    pairs = {
        f"reconstructed/{stem}": f"cad/{stem}" for stem in sorted(set(cad) & set(rec))
    }
    return Manifest(rows, root=root), pairs


def make_desk_dataset(out_dir, classes=None, per_class=40, seed=0):
    """Generate a procedural CAD corpus and write it as OBJ files + manifest.

    Regenerating with the same arguments reproduces every file byte for
    byte. Returns the Manifest (also saved to out_dir/manifest.csv).
    """
    classes = list(classes) if classes is not None else list(generator_classes())
    if per_class < 1:
        raise ManifestError("per_class must be >= 1")
    rows = []
    for ci, label in enumerate(classes):
        folder = os.path.join(out_dir, label)
        os.makedirs(folder, exist_ok=True)
        for i in range(per_class):
            model_seed = int(
                np.random.SeedSequence((seed, ci, i)).generate_state(1)[0]
            )
            mesh = gen_procedural(label, seed=model_seed)
            fname = f"{label}_{i:03d}.obj"
            write_obj(mesh, os.path.join(folder, fname))
            rows.append(
                ManifestRow(
                    model_id=f"{label}_{i:03d}",
                    class_label=label,
                    mesh_path=os.path.join(label, fname),
                )
            )
    manifest = Manifest(rows, root=out_dir)
    save_manifest(manifest, os.path.join(out_dir, "manifest.csv"))
    return manifest
