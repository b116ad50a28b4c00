"""Distance-distribution reports across catalogs and occlusion conditions."""

import csv
import json
import os

import numpy as np

from ..errors import ValidationError
from ..retrieval import pairwise_distances

__all__ = ["sensitivity_report"]


def _stats(values):
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        return {"count": 0, "mean": 0.0, "min": 0.0, "max": 0.0}
    return {
        "count": int(arr.size),
        "mean": float(arr.mean()),
        "min": float(arr.min()),
        "max": float(arr.max()),
    }


def _nearest_rows(catalog, queries):
    table = pairwise_distances(catalog, queries)
    rows = []
    for q, dist_row in zip(queries, table.matrix):
        i = int(dist_row.argmin())
        rows.append(
            {
                "query_id": q.model_id,
                "nearest_id": catalog.model_ids[i],
                "distance": float(dist_row[i]),
                "correct_class": catalog.class_labels[i] == q.class_label,
            }
        )
    return table, rows


def sensitivity_report(catalogs, queries, occluded=None, out_dir=None):
    """Distance distributions per corpus, split by match correctness.

    ``catalogs`` maps a corpus tag to a Catalog. ``queries`` is either one
    list scored against every corpus, or a tag-keyed dict when each corpus
    has its own embedding space (the pre-training comparison). The same
    shape rule applies to ``occluded``, which holds degraded variants of
    the same query ids and adds a clean-vs-occluded nearest-match
    comparison per corpus. Zero-distance clean baselines are reported with
    ratio 0 and left out of the ratio statistics. With ``out_dir`` set,
    the report is written as JSON plus per-corpus distance CSVs.
    """
    if not catalogs:
        raise ValidationError("needs at least one catalog")
    if not isinstance(queries, dict):
        queries = {tag: queries for tag in catalogs}
    if occluded is not None and not isinstance(occluded, dict):
        occluded = {tag: occluded for tag in catalogs}
    occluded = occluded or {}
    for tag in catalogs:
        if not queries.get(tag):
            raise ValidationError(f"corpus {tag!r} needs at least one query")
        ids = {q.model_id for q in queries[tag]}
        for q in occluded.get(tag, []):
            if q.model_id not in ids:
                raise ValidationError(
                    f"occluded query {q.model_id!r} has no clean mate"
                )

    report = {"corpora": {}, "positive_negative": {}, "partial_scan": {}}
    tables = {}
    for tag in sorted(catalogs):
        catalog = catalogs[tag]
        table, rows = _nearest_rows(catalog, queries[tag])
        tables[tag] = table
        nearest = [r["distance"] for r in rows]
        report["corpora"][tag] = {
            "query_count": len(queries[tag]),
            "catalog_count": len(catalog),
            "nearest": _stats(nearest),
            "all_pairs": _stats(table.matrix.ravel()),
        }
        report["positive_negative"][tag] = {
            "positive": sorted(r["distance"] for r in rows if r["correct_class"]),
            "negative": sorted(r["distance"] for r in rows if not r["correct_class"]),
        }
        if occluded.get(tag):
            _, occ_rows = _nearest_rows(catalog, occluded[tag])
            clean_by_id = {r["query_id"]: r for r in rows}
            comparison, ratios = [], []
            for occ in occ_rows:
                clean = clean_by_id[occ["query_id"]]
                if clean["distance"] == 0.0:
                    ratio = 0.0
                else:
                    ratio = occ["distance"] / clean["distance"]
                    ratios.append(ratio)
                comparison.append(
                    {
                        "query_id": occ["query_id"],
                        "clean": clean["distance"],
                        "occluded": occ["distance"],
                        "ratio": ratio,
                    }
                )
            report["partial_scan"][tag] = {
                "rows": comparison,
                "clean_mean": _stats([c["clean"] for c in comparison])["mean"],
                "occluded_mean": _stats([c["occluded"] for c in comparison])["mean"],
                "ratio_mean": _stats(ratios)["mean"],
                "excluded_zero_baselines": len(comparison) - len(ratios),
            }

    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        for tag, table in tables.items():
            table.save_csv(os.path.join(out_dir, f"distances_{tag}.csv"))
        if report["partial_scan"]:
            path = os.path.join(out_dir, "partial_scan.csv")
            with open(path, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["corpus", "query_id", "clean", "occluded", "ratio"])
                for tag in sorted(report["partial_scan"]):
                    for row in report["partial_scan"][tag]["rows"]:
                        writer.writerow(
                            [
                                tag,
                                row["query_id"],
                                "%.9g" % row["clean"],
                                "%.9g" % row["occluded"],
                                "%.9g" % row["ratio"],
                            ]
                        )
        with open(os.path.join(out_dir, "sensitivity.json"), "w") as fh:
            json.dump(report, fh, sort_keys=True, indent=1)
            fh.write("\n")
    return report
