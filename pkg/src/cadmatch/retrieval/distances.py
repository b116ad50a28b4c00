"""Pairwise distance tables and the positive/negative match rule."""

import csv
from dataclasses import dataclass

import numpy as np

from ..errors import ShapeError, ValidationError

__all__ = [
    "DistanceTable",
    "calibrate_threshold",
    "match_decision",
    "pairwise_distances",
]


@dataclass(frozen=True)
class DistanceTable:
    query_ids: tuple
    catalog_ids: tuple
    matrix: np.ndarray  # (n_queries, n_catalog) float64

    def summary(self):
        """Per-query (min, mean) rows, in query order."""
        return [
            {
                "query_id": qid,
                "min": float(row.min()),
                "mean": float(row.mean()),
                "nearest": self.catalog_ids[int(row.argmin())],
            }
            for qid, row in zip(self.query_ids, self.matrix)
        ]

    def save_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["query_id", *self.catalog_ids])
            for qid, row in zip(self.query_ids, self.matrix):
                writer.writerow([qid, *("%.9g" % v for v in row)])


def pairwise_distances(catalog, queries):
    """Full query x catalog Euclidean distance matrix."""
    if not queries:
        raise ValidationError("needs at least one query")
    feats = np.stack([q.feature.values for q in queries])
    if feats.shape[1] != catalog.width:
        raise ShapeError(
            f"query width {feats.shape[1]} != catalog width {catalog.width}"
        )
    # row-at-a-time differences: exact zeros for self-pairs, bounded memory
    matrix = np.empty((feats.shape[0], len(catalog)), dtype=np.float64)
    for i, q in enumerate(feats):
        diff = catalog.features - q[None, :]
        matrix[i] = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    return DistanceTable(
        query_ids=tuple(q.model_id for q in queries),
        catalog_ids=tuple(catalog.model_ids),
        matrix=matrix,
    )


def match_decision(d, threshold):
    """Positive iff d <= threshold (boundary inclusive)."""
    if d < 0:
        raise ValidationError(f"distance must be nonnegative, got {d}")
    if threshold <= 0:
        raise ValidationError(f"threshold must be positive, got {threshold}")
    return "positive" if d <= threshold else "negative"


def _f1(tp, fp, fn):
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def calibrate_threshold(distances, is_positive):
    """Threshold maximizing F1 of the inclusive d <= t rule.

    ``is_positive`` marks which distances belong to true matches. Candidates
    are the observed distances themselves; among equal-F1 candidates the
    smallest wins, so the boundary sits tight against the positives.
    Returns (threshold, best_f1).
    """
    distances = np.asarray(distances, dtype=np.float64)
    truth = np.asarray(is_positive, dtype=bool)
    if distances.shape != truth.shape or distances.ndim != 1:
        raise ValidationError("distances and is_positive must be equal-length 1-D")
    if distances.size == 0:
        raise ValidationError("needs at least one labeled distance")
    if (distances < 0).any():
        raise ValidationError("distances must be nonnegative")
    if not truth.any():
        raise ValidationError("needs at least one positive example")
    best_t, best_f1 = None, -1.0
    for t in np.unique(distances):
        pred = distances <= t
        tp = int(np.count_nonzero(pred & truth))
        fp = int(np.count_nonzero(pred & ~truth))
        fn = int(np.count_nonzero(~pred & truth))
        f1 = _f1(tp, fp, fn)
        if f1 > best_f1:
            best_t, best_f1 = float(t), f1
    return best_t, best_f1
