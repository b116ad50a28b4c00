"""PCA projection for embedding visualization."""

import json

import numpy as np

from ..errors import RankError, ShapeError

__all__ = ["export_pca_csv", "pca_project"]


def pca_project(features, dims=2):
    """Project feature vectors onto their top principal axes.

    Returns (coordinates (n, dims), explained-variance ratios (dims,),
    basis (dims, width) with orthonormal rows). Signs follow the convention
    that each axis's largest-magnitude loading is positive, which pins an
    otherwise arbitrary choice and keeps runs comparable.
    """
    if dims < 1:
        raise RankError(f"dims must be >= 1, got {dims}")
    rows = [np.asarray(f.values, dtype=np.float64) for f in features]
    if len(rows) < dims + 1:
        raise RankError(f"need at least {dims + 1} vectors for {dims} axes, got {len(rows)}")
    width = rows[0].shape[0]
    if any(r.shape != (width,) for r in rows):
        raise ShapeError("feature widths differ")
    if dims > width:
        raise RankError(f"dims = {dims} exceeds feature width {width}")

    x = np.stack(rows)
    centered = x - x.mean(axis=0, keepdims=True)
    _, singular, vt = np.linalg.svd(centered, full_matrices=False)

    basis = vt[:dims].copy()
    for i in range(dims):
        pivot = np.argmax(np.abs(basis[i]))
        if basis[i, pivot] < 0:
            basis[i] = -basis[i]
    coords = centered @ basis.T

    total = float((singular**2).sum())
    if total == 0.0:
        ratios = np.zeros(dims)
    else:
        ratios = (singular[:dims] ** 2) / total
    return coords, ratios, basis


def _axis_names(dims):
    named = ("x", "y", "z")
    return [named[i] if i < 3 else f"pc{i + 1}" for i in range(dims)]


def export_pca_csv(catalog, csv_path, var_path, dims=2):
    """Project a catalog's features and write id,class,provenance,x,y,... CSV
    plus a JSON sidecar with the explained-variance ratios."""
    from ..encoders.network import FeatureVector  # deferred: keeps eval import-light

    feats = [FeatureVector(v, catalog.modality) for v in catalog.features]
    coords, ratios, _ = pca_project(feats, dims=dims)
    with open(csv_path, "w") as fh:
        fh.write("id,class,provenance," + ",".join(_axis_names(dims)) + "\n")
        for i in range(len(catalog)):
            cells = ",".join("%.9g" % v for v in coords[i])
            fh.write(
                "%s,%s,%s,%s\n"
                % (
                    catalog.model_ids[i],
                    catalog.class_labels[i],
                    catalog.provenances[i],
                    cells,
                )
            )
    with open(var_path, "w") as fh:
        json.dump({"explained_variance_ratios": ratios.tolist()}, fh, sort_keys=True)
        fh.write("\n")
    return coords, ratios
