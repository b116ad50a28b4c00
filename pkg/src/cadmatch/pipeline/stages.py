"""Resumable pipeline stages: prepare -> train -> index -> evaluate.

Every stage writes stage_<name>.json into the output directory with the
config hash, the hashes of the files it produced, and the hashes of the
prerequisite artifacts it consumed. A rerun whose config and outputs are
unchanged is a no-op; a prerequisite built from a different config raises
in strict mode and warns otherwise.
"""

import hashlib
import json
import os
import urllib.parse
import warnings
from dataclasses import replace

import numpy as np

from ..datasets import (
    Manifest,
    load_manifest,
    make_desk_dataset,
    save_manifest,
    stratified_split,
)
from ..encoders import TrainExample, load_checkpoint, save_checkpoint, train
from ..errors import DependencyError, StalenessError, ValidationError
from ..eval import class_metrics, export_pca_csv, sensitivity_report, topk_accuracy
from ..geometry import (
    PointCloud,
    load_obj,
    load_pointcloud,
    normalize_unit_sphere,
    occlude,
    sample_surface,
    save_pointcloud,
)
from ..render import ViewSet, load_viewset, render_views, save_viewset
from ..encoders.network import FeatureVector
from ..retrieval import (
    CatalogEntry,
    build_catalog,
    calibrate_threshold,
    load_catalog,
    match_decision,
    query,
    save_catalog,
)
from .config import config_hash

__all__ = ["BRANCHES", "STAGES", "run_all", "run_stage"]

STAGES = ("prepare", "train", "index", "evaluate")
DEPENDS = {"prepare": None, "train": "prepare", "index": "train",
           "evaluate": "index"}
BRANCHES = ("joint", "image", "point")

# seed-stream tags so no two purposes share a random stream
_SEED_VIEWS, _SEED_POINTS, _SEED_SCAN_VIEWS, _SEED_SCAN_POINTS, _SEED_OCCLUDE = range(5)


def _sha256_file(path):
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _tree_hash(files):
    digest = hashlib.sha256()
    for rel in sorted(files):
        digest.update(f"{rel}:{files[rel]}\n".encode())
    return digest.hexdigest()


def _fname(model_id):
    # model ids may contain path separators; percent-encode for file names
    return urllib.parse.quote(model_id, safe="")


def _report_path(cfg, stage):
    return os.path.join(cfg.out_dir, f"stage_{stage}.json")


def _write_report(report, path):
    with open(path, "w") as fh:
        json.dump(report, fh, sort_keys=True, indent=1)
        fh.write("\n")


def _hash_outputs(cfg, rel_paths):
    return {rel: _sha256_file(os.path.join(cfg.out_dir, rel)) for rel in rel_paths}


def _outputs_intact(cfg, report):
    for rel, recorded in report.get("files", {}).items():
        path = os.path.join(cfg.out_dir, rel)
        if not os.path.exists(path) or _sha256_file(path) != recorded:
            return False
    return True


def run_stage(cfg, stage, strict=False):
    """Run one pipeline stage, returning its report dict.

    The returned dict carries ``reused: True`` when the stage was a no-op
    because config and outputs were both unchanged; the on-disk report is
    left byte-identical in that case.
    """
    if stage not in STAGES:
        raise ValidationError(f"stage must be one of {STAGES}, got {stage!r}")
    os.makedirs(cfg.out_dir, exist_ok=True)
    h = config_hash(cfg)

    dep = DEPENDS[stage]
    dep_report = None
    if dep is not None:
        dep_path = _report_path(cfg, dep)
        if not os.path.exists(dep_path):
            raise DependencyError(f"stage {stage!r} needs {dep!r} to run first")
        with open(dep_path) as fh:
            dep_report = json.load(fh)
        if dep_report["config_hash"] != h:
            msg = (
                f"stage {dep!r} was built from config {dep_report['config_hash'][:12]}, "
                f"current config is {h[:12]}"
            )
            if strict:
                raise StalenessError(msg)
            warnings.warn(msg, stacklevel=2)

    path = _report_path(cfg, stage)
    if os.path.exists(path):
        with open(path) as fh:
            existing = json.load(fh)
        if existing.get("config_hash") == h and _outputs_intact(cfg, existing):
            return dict(existing, reused=True)

    runner = {
        "prepare": _stage_prepare,
        "train": _stage_train,
        "index": _stage_index,
        "evaluate": _stage_evaluate,
    }[stage]
    report = runner(cfg, h, dep_report)
    _write_report(report, path)
    return dict(report, reused=False)


def run_all(cfg, strict=False):
    return {stage: run_stage(cfg, stage, strict=strict) for stage in STAGES}


def _normalized_mesh(path):
    mesh = load_obj(path)
    center = mesh.vertices.mean(axis=0)
    radius = np.linalg.norm(mesh.vertices - center, axis=1).max()
    return mesh.transformed(scale=1.0 / radius, offset=-center / radius)


def _stage_prepare(cfg, h, dep_report):
    if cfg.dataset.kind == "desk":
        manifest = make_desk_dataset(
            os.path.join(cfg.out_dir, "dataset"),
            classes=cfg.dataset.resolved_classes(),
            per_class=cfg.dataset.per_class,
            seed=cfg.seed,
        )
    else:
        manifest = load_manifest(cfg.dataset.manifest)
    split = stratified_split(manifest, cfg.dataset.train_fraction, cfg.seed)
    # the split manifest lives in out_dir; re-anchor mesh paths to it
    split = Manifest(
        [
            replace(row, mesh_path=os.path.relpath(split.resolve(row), cfg.out_dir))
            for row in split.rows
        ],
        root=cfg.out_dir,
    )
    save_manifest(split, os.path.join(cfg.out_dir, "split_manifest.csv"))

    for sub in ("views", "points", "scan_views", "scan_points"):
        os.makedirs(os.path.join(cfg.out_dir, "prepared", sub), exist_ok=True)

    rel_files = ["split_manifest.csv", "split_manifest.csv.json"]
    n_test = 0
    for i, row in enumerate(split.rows):
        mesh = _normalized_mesh(split.resolve(row))
        jobs = [("views", "points", _SEED_VIEWS, _SEED_POINTS)]
        if row.split == "test":
            n_test += 1
            jobs.append(
                ("scan_views", "scan_points", _SEED_SCAN_VIEWS, _SEED_SCAN_POINTS)
            )
        for view_dir, point_dir, view_tag, point_tag in jobs:
            vs = render_views(mesh, cfg.render, seed=(cfg.seed, view_tag, i))
            vs = ViewSet(vs.images, model_id=row.model_id)
            cloud = normalize_unit_sphere(
                sample_surface(
                    mesh, cfg.sampling.n_points, seed=(cfg.seed, point_tag, i)
                )
            )
            rel_v = os.path.join("prepared", view_dir, _fname(row.model_id) + ".npz")
            rel_p = os.path.join("prepared", point_dir, _fname(row.model_id) + ".pcb")
            save_viewset(vs, os.path.join(cfg.out_dir, rel_v))
            save_pointcloud(cloud, os.path.join(cfg.out_dir, rel_p))
            rel_files.extend([rel_v, rel_p])

    files = _hash_outputs(cfg, rel_files)
    return {
        "stage": "prepare",
        "config_hash": h,
        "split_manifest": "split_manifest.csv",
        "row_count": len(split),
        "train_rows": len(split.subset("train")),
        "test_rows": n_test,
        "classes": list(split.classes),
        "files": files,
        "output_hash": _tree_hash(files),
    }


def _load_example(cfg, row, label, scan=False):
    view_dir = "scan_views" if scan else "views"
    point_dir = "scan_points" if scan else "points"
    vs = load_viewset(
        os.path.join(cfg.out_dir, "prepared", view_dir, _fname(row.model_id) + ".npz")
    )
    cloud = load_pointcloud(
        os.path.join(cfg.out_dir, "prepared", point_dir, _fname(row.model_id) + ".pcb")
    )
    return TrainExample(
        label=label,
        example_id=row.model_id,
        views=vs.as_array(),
        points=np.asarray(cloud.points, dtype=np.float64),
        masks=vs.masks_array(),
    ), vs, cloud


def _split_and_labels(cfg):
    split = load_manifest(os.path.join(cfg.out_dir, "split_manifest.csv"))
    label_of = {label: i for i, label in enumerate(split.classes)}
    return split, label_of


def _stage_train(cfg, h, dep_report):
    split, label_of = _split_and_labels(cfg)
    examples = [
        _load_example(cfg, row, label_of[row.class_label])[0]
        for row in split.subset("train")
    ]
    checkpoints, hashes, reports = {}, {}, {}
    for branch in BRANCHES:
        arch = cfg.build_arch(len(label_of), branch)
        model, report = train(examples, arch, cfg.train)
        rel = f"model_{branch}.cmw"
        save_checkpoint(
            model,
            os.path.join(cfg.out_dir, rel),
            extra={"classes": list(split.classes), "config_hash": h},
        )
        checkpoints[branch] = rel
        reports[branch] = report
        rel_report = f"train_report_{branch}.json"
        _write_report(report, os.path.join(cfg.out_dir, rel_report))
        hashes.update(_hash_outputs(cfg, [rel, rel_report]))
    return {
        "stage": "train",
        "config_hash": h,
        "prepare_hash": dep_report["output_hash"],
        "checkpoints": checkpoints,
        "reports": reports,
        "files": hashes,
        "output_hash": _tree_hash(hashes),
    }


def _stage_index(cfg, h, dep_report):
    split, label_of = _split_and_labels(cfg)
    models = {
        branch: load_checkpoint(os.path.join(cfg.out_dir, rel))[0]
        for branch, rel in dep_report["checkpoints"].items()
    }
    entries = {branch: [] for branch in models}
    for row in split.rows:
        _, vs, cloud = _load_example(cfg, row, 0)
        for branch, model in models.items():
            feat = model.feature(vs=vs, pc=cloud)
            entries[branch].append(
                CatalogEntry(
                    model_id=row.model_id,
                    class_label=row.class_label,
                    feature=feat,
                    provenance=row.provenance,
                )
            )
    catalogs, files = {}, {}
    for branch, entry_list in entries.items():
        rel = f"catalog_{branch}.cat"
        save_catalog(build_catalog(entry_list), os.path.join(cfg.out_dir, rel))
        catalogs[branch] = rel
        files.update(_hash_outputs(cfg, [rel, rel + ".json"]))
    return {
        "stage": "index",
        "config_hash": h,
        "checkpoint_hashes": {
            b: dep_report["files"][rel] for b, rel in dep_report["checkpoints"].items()
        },
        "catalogs": catalogs,
        "files": files,
        "output_hash": _tree_hash(files),
    }


def _pad_points(points, n_points):
    # occlusion shrinks a cloud; tile rows back up to the encoder's width.
    # the point encoder max-pools, so duplicated points cannot change it
    idx = np.arange(n_points) % len(points)
    return points[idx]


def _export_pca(cfg, catalog, rel_csv, rel_var):
    export_pca_csv(
        catalog,
        os.path.join(cfg.out_dir, rel_csv),
        os.path.join(cfg.out_dir, rel_var),
    )


def _stage_evaluate(cfg, h, dep_report):
    split, label_of = _split_and_labels(cfg)
    with open(_report_path(cfg, "train")) as fh:
        train_report = json.load(fh)
    models = {
        branch: load_checkpoint(os.path.join(cfg.out_dir, rel))[0]
        for branch, rel in train_report["checkpoints"].items()
    }
    catalogs = {
        branch: load_catalog(os.path.join(cfg.out_dir, rel))
        for branch, rel in dep_report["catalogs"].items()
    }
    test_rows = split.subset("test")
    ks = cfg.retrieval.ks
    k_max = max(ks)

    # the unseen-library catalogs: only models the encoders never trained on,
    # mirroring the transfer evaluation where every catalog entry is novel
    test_ids = {row.model_id for row in test_rows}
    heldout = {
        branch: build_catalog(
            [
                CatalogEntry(
                    cat.model_ids[i],
                    cat.class_labels[i],
                    FeatureVector(cat.features[i], cat.modality),
                    cat.provenances[i],
                )
                for i in range(len(cat))
                if cat.model_ids[i] in test_ids
            ]
        )
        for branch, cat in catalogs.items()
    }

    truth_cls, preds = [], {b: [] for b in models}
    results = {b: [] for b in models}
    results_full = {b: [] for b in models}
    clean_entries, occluded_entries = [], []
    occluded_results = []
    for i, row in enumerate(split.rows):
        if row.split != "test":
            continue
        _, vs, cloud = _load_example(cfg, row, 0, scan=True)
        truth_cls.append(label_of[row.class_label])
        for branch, model in models.items():
            preds[branch].append(model.classify(vs=vs, pc=cloud)[0])
            feat = model.feature(vs=vs, pc=cloud)
            results[branch].append(
                query(heldout[branch], feat, k=k_max, query_id=row.model_id)
            )
            results_full[branch].append(
                query(catalogs[branch], feat, k=k_max, query_id=row.model_id)
            )
            if branch == "joint":
                clean_entries.append(
                    CatalogEntry(row.model_id, row.class_label, feat, "scanned")
                )
        occluded = occlude(
            cloud,
            fraction=cfg.retrieval.occlusion_fraction,
            seed=(cfg.seed, _SEED_OCCLUDE, i),
        )
        occluded = normalize_unit_sphere(occluded)
        padded = occluded
        if len(occluded.points) != cfg.sampling.n_points:
            padded = PointCloud(
                _pad_points(occluded.points, cfg.sampling.n_points),
                source_id=occluded.source_id,
            )
        occ_feat = models["joint"].feature(vs=vs, pc=padded)
        occluded_entries.append(
            CatalogEntry(row.model_id, row.class_label, occ_feat, "scanned")
        )
        occluded_results.append(
            query(heldout["joint"], occ_feat, k=1, query_id=row.model_id)
        )

    truth_ids = {row.model_id: row.model_id for row in test_rows}
    retrieval_topk = {
        b: topk_accuracy(results[b], truth_ids, ks=ks) for b in results
    }
    retrieval_topk_full = {
        b: topk_accuracy(results_full[b], truth_ids, ks=ks) for b in results_full
    }
    classification = {
        b: float(100.0 * np.mean(np.array(preds[b]) == np.array(truth_cls)))
        for b in preds
    }

    metrics = class_metrics(preds["joint"], truth_cls, n_classes=len(label_of))
    metrics.topk_accuracy = retrieval_topk["joint"]
    metrics.save(os.path.join(cfg.out_dir, "metrics.json"))

    sens_dir = os.path.join(cfg.out_dir, "sensitivity")
    sens = sensitivity_report(
        {"joint": catalogs["joint"]},
        clean_entries,
        occluded=occluded_entries,
        out_dir=sens_dir,
    )

    # match threshold over nearest-catalog distances: each query (the clean
    # scan and its occluded variant) counts as a positive match iff the
    # nearest entry is the query's own model, so the calibrated threshold
    # separates correct retrievals from failures such as partial scans that
    # land far from every catalog entry
    distances, is_positive = [], []
    for res in results["joint"] + occluded_results:
        nearest_id, dist = res.ranked[0]
        distances.append(float(dist))
        is_positive.append(nearest_id == res.query_id)
    if any(is_positive):
        threshold, f1 = calibrate_threshold(distances, is_positive)
    else:  # no scan has its model in the catalog; nothing to calibrate
        threshold, f1 = None, 0.0
    if cfg.retrieval.threshold is not None:
        threshold = cfg.retrieval.threshold
    decisions = (
        [match_decision(d, threshold) for d in distances]
        if threshold is not None
        else []
    )

    _export_pca(cfg, catalogs["joint"], "pca.csv", "pca_variance.json")

    rel_files = [
        "metrics.json",
        "pca.csv",
        "pca_variance.json",
        os.path.join("sensitivity", "distances_joint.csv"),
        os.path.join("sensitivity", "partial_scan.csv"),
        os.path.join("sensitivity", "sensitivity.json"),
    ]
    files = _hash_outputs(cfg, rel_files)
    return {
        "stage": "evaluate",
        "config_hash": h,
        "checkpoint_hashes": dep_report["checkpoint_hashes"],
        "catalog_hashes": {
            b: dep_report["files"][rel] for b, rel in dep_report["catalogs"].items()
        },
        "classification_accuracy": classification,
        "retrieval_topk": {
            b: {str(k): v for k, v in table.items()}
            for b, table in retrieval_topk.items()
        },
        "retrieval_topk_full_library": {
            b: {str(k): v for k, v in table.items()}
            for b, table in retrieval_topk_full.items()
        },
        "partial_scan": {
            "clean_mean": sens["partial_scan"]["joint"]["clean_mean"],
            "occluded_mean": sens["partial_scan"]["joint"]["occluded_mean"],
            "ratio_mean": sens["partial_scan"]["joint"]["ratio_mean"],
        },
        "threshold": {
            "value": threshold,
            "f1": f1,
            "calibrated": cfg.retrieval.threshold is None,
            "positive_decisions": decisions.count("positive"),
            "negative_decisions": decisions.count("negative"),
        },
        "query_count": len(test_rows),
        "files": files,
        "output_hash": _tree_hash(files),
    }
