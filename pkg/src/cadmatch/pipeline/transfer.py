"""Pre-train on one corpus, extract features on another.

The transfer keeps every trained tensor except the classification head,
which is re-initialized for the target class count and never trained: the
network is used purely as a feature extractor on the target corpus.
"""

import numpy as np

from ..encoders import JointModel, TrainExample, train
from ..errors import ContaminationError, ValidationError
from ..eval import sensitivity_report
from ..geometry import normalize_unit_sphere, sample_surface
from ..render import ViewSet, render_views
from ..retrieval import CatalogEntry, build_catalog
from .stages import (
    _SEED_POINTS,
    _SEED_SCAN_POINTS,
    _SEED_SCAN_VIEWS,
    _SEED_VIEWS,
    _normalized_mesh,
)

__all__ = ["pretrain_then_transfer"]


def _materialize(manifest, rows, cfg, scan=False):
    """Render and sample manifest rows into (row, ViewSet, PointCloud)."""
    view_tag = _SEED_SCAN_VIEWS if scan else _SEED_VIEWS
    point_tag = _SEED_SCAN_POINTS if scan else _SEED_POINTS
    index_of = {row.model_id: i for i, row in enumerate(manifest.rows)}
    out = []
    for row in rows:
        i = index_of[row.model_id]
        mesh = _normalized_mesh(manifest.resolve(row))
        vs = render_views(mesh, cfg.render, seed=(cfg.seed, view_tag, i))
        vs = ViewSet(vs.images, model_id=row.model_id)
        cloud = normalize_unit_sphere(
            sample_surface(mesh, cfg.sampling.n_points, seed=(cfg.seed, point_tag, i))
        )
        out.append((row, vs, cloud))
    return out


def _train_on(manifest, rows, cfg):
    label_of = {label: i for i, label in enumerate(manifest.classes)}
    examples = []
    for row, vs, cloud in _materialize(manifest, rows, cfg):
        examples.append(
            TrainExample(
                label=label_of[row.class_label],
                example_id=row.model_id,
                views=vs.as_array(),
                points=np.asarray(cloud.points, dtype=np.float64),
                masks=vs.masks_array(),
            )
        )
    arch = cfg.build_arch(len(label_of), "joint")
    return train(examples, arch, cfg.train)


def _extract_catalog(model, manifest, rows, cfg, scan=False):
    entries = []
    for row, vs, cloud in _materialize(manifest, rows, cfg, scan=scan):
        entries.append(
            CatalogEntry(
                model_id=row.model_id,
                class_label=row.class_label,
                feature=model.feature(vs=vs, pc=cloud),
                provenance="scanned" if scan else row.provenance,
            )
        )
    return build_catalog(entries)


def pretrain_then_transfer(source, target, cfg, use_full_source=False,
                           with_baseline=False):
    """Train on ``source``, carry the backbones to ``target`` unchanged.

    ``use_full_source`` trains on every source row instead of only the
    train split. With ``with_baseline`` the report also embeds the target
    corpus with a model trained on the target's own train split, giving a
    second distance distribution to compare against.

    Returns (model, catalog, report): the transferred model, the catalog
    of target features it produced, and a report whose sensitivity section
    scores the target's test rows as scan-simulated queries.
    """
    overlap = {r.model_id for r in source.rows} & {r.model_id for r in target.rows}
    if overlap:
        raise ContaminationError(
            f"{len(overlap)} model_id(s) appear in both corpora, "
            f"e.g. {sorted(overlap)[:3]}"
        )

    source_rows = source.rows if use_full_source else source.subset("train")
    if not source_rows:
        raise ValidationError("source corpus has no training rows")
    source_model, source_report = _train_on(source, source_rows, cfg)

    target_classes = target.classes
    arch = cfg.build_arch(len(target_classes), "joint")
    model = JointModel(arch, seed=cfg.seed)
    state = model.state()
    for name, value in source_model.state().items():
        if name.split("/")[0] != "joint_head" and name in state:
            state[name] = value
    model.load_state(state)

    catalog = _extract_catalog(model, target, target.rows, cfg)

    test_rows = target.subset("test") or target.rows
    queries = {
        "transfer": _extract_catalog(model, target, test_rows, cfg, scan=True)
    }
    catalogs = {"transfer": catalog}
    baseline_report = None
    if with_baseline:
        baseline_model, baseline_report = _train_on(
            target, target.subset("train"), cfg
        )
        catalogs["target_trained"] = _extract_catalog(
            baseline_model, target, target.rows, cfg
        )
        queries["target_trained"] = _extract_catalog(
            baseline_model, target, test_rows, cfg, scan=True
        )

    sens = sensitivity_report(
        catalogs, {tag: _catalog_entries(q) for tag, q in queries.items()}
    )
    report = {
        "use_full_source": use_full_source,
        "head_reinitialized": True,
        "source_rows": len(source_rows),
        "target_rows": len(target.rows),
        "source_classes": list(source.classes),
        "target_classes": list(target_classes),
        "source_training": source_report,
        "baseline_training": baseline_report,
        "sensitivity": sens,
    }
    return model, catalog, report


def _catalog_entries(catalog):
    from ..encoders import FeatureVector

    return [
        CatalogEntry(
            catalog.model_ids[i],
            catalog.class_labels[i],
            FeatureVector(catalog.features[i], catalog.modality),
            catalog.provenances[i],
        )
        for i in range(len(catalog))
    ]
