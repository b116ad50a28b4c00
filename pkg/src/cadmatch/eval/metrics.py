"""Classification and retrieval accuracy metrics.

MetricsReport serializes to canonical JSON (sorted keys, no timestamps), so
two identical evaluation runs produce byte-identical report files.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from ..errors import ValidationError

__all__ = ["MetricsReport", "class_metrics", "topk_accuracy"]


@dataclass
class MetricsReport:
    per_class: dict  # label -> {precision, recall, support, precision_defined}
    overall_accuracy: float
    macro_precision: float
    macro_recall: float
    confusion: np.ndarray  # (m, m) counts, rows = truth
    topk_accuracy: dict = field(default_factory=dict)  # k -> percent

    def to_dict(self):
        return {
            "per_class": {str(k): v for k, v in self.per_class.items()},
            "overall_accuracy": self.overall_accuracy,
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "confusion": self.confusion.tolist(),
            "topk_accuracy": {str(k): v for k, v in self.topk_accuracy.items()},
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_json())


def class_metrics(predictions, truth, n_classes=None):
    """Per-class precision/recall, overall accuracy, and the confusion matrix.

    Precision with an empty prediction column is reported as 0 and flagged
    via ``precision_defined: False`` rather than poisoning macro averages
    with NaN.
    """
    predictions = np.asarray(predictions, dtype=int)
    truth = np.asarray(truth, dtype=int)
    if predictions.shape != truth.shape or predictions.ndim != 1:
        raise ValidationError("predictions and truth must be equal-length 1-D")
    if predictions.size == 0:
        raise ValidationError("needs at least one prediction")
    if predictions.min(initial=0) < 0 or truth.min() < 0:
        raise ValidationError("labels must be nonnegative")
    m = n_classes if n_classes is not None else int(max(predictions.max(), truth.max())) + 1
    if predictions.max() >= m or truth.max() >= m:
        raise ValidationError(f"labels exceed n_classes = {m}")

    confusion = np.zeros((m, m), dtype=np.int64)
    np.add.at(confusion, (truth, predictions), 1)

    per_class = {}
    precisions, recalls = [], []
    for c in range(m):
        tp = int(confusion[c, c])
        col = int(confusion[:, c].sum())
        row = int(confusion[c, :].sum())
        defined = col > 0
        precision = 100.0 * tp / col if defined else 0.0
        recall = 100.0 * tp / row if row > 0 else 0.0
        per_class[c] = {
            "precision": precision,
            "recall": recall,
            "support": row,
            "precision_defined": defined,
        }
        precisions.append(precision)
        recalls.append(recall)

    return MetricsReport(
        per_class=per_class,
        overall_accuracy=float(100.0 * (predictions == truth).mean()),
        macro_precision=float(np.mean(precisions)),
        macro_recall=float(np.mean(recalls)),
        confusion=confusion,
    )


def topk_accuracy(results, truth, ks=(1, 3, 5)):
    """Fraction of queries whose correct model appears within the first k ranks.

    ``truth`` maps query_id to the correct model_id; a query without a truth
    entry is a caller bug, not a miss.
    """
    if not results:
        raise ValidationError("needs at least one retrieval result")
    ranks = []
    for res in results:
        if res.query_id not in truth:
            raise ValidationError(f"no truth entry for query {res.query_id!r}")
        want = truth[res.query_id]
        ids = res.model_ids
        ranks.append(ids.index(want) + 1 if want in ids else None)
    out = {}
    for k in ks:
        hits = sum(1 for r in ranks if r is not None and r <= k)
        out[int(k)] = float(100.0 * hits / len(ranks))
    return out
