"""Command-line surface: every subcommand is a thin adapter over a module
operation, so anything the CLI can do is equally scriptable from Python.

Machine output is JSON (JSON lines for rankings); ``--pretty`` switches the
human-facing commands to aligned tables. Errors leave as one JSON object on
stderr with exit code 1; usage problems exit 2 via argparse.
"""

import argparse
import json
import os
import sys

import numpy as np

from .datasets import make_desk_dataset
from .encoders import load_checkpoint
from .errors import CadmatchError, ValidationError
from .eval import export_pca_csv
from .geometry import (
    load_obj,
    load_pointcloud,
    normalize_unit_sphere,
    sample_surface,
    save_pointcloud,
)
from .pipeline import STAGES, load_config, run_stage
from .render import RenderConfig, render_views, save_viewset
from .retrieval import (
    CatalogEntry,
    build_catalog,
    load_catalog,
    pairwise_distances,
    query,
)

__all__ = ["main"]

CONFIG_ENV = "CADMATCH_CONFIG"
OUT_ENV = "CADMATCH_OUT"


def _resolve(value, env_var):
    if value:
        return value
    return os.environ.get(env_var) or None


def _emit(obj, pretty=False):
    if pretty:
        width = max(len(k) for k in obj)
        for k, v in obj.items():
            print(f"{k:<{width}}  {v}")
    else:
        print(json.dumps(obj, sort_keys=True))


def _load_experiment(args):
    path = _resolve(getattr(args, "config", None), CONFIG_ENV)
    if not path:
        raise ValidationError(
            f"needs --config or ${CONFIG_ENV} pointing at a TOML/JSON config"
        )
    cfg = load_config(path)
    out = _resolve(getattr(args, "out", None), OUT_ENV)
    if out:
        cfg.out_dir = out
    return cfg


def _normalized_mesh(path):
    mesh = load_obj(path)
    center = mesh.vertices.mean(axis=0)
    radius = np.linalg.norm(mesh.vertices - center, axis=1).max()
    return mesh.transformed(scale=1.0 / radius, offset=-center / radius)


def _render_config(args, arch=None):
    """Render settings from --config when given, else defaults; when a model
    is in play its input geometry wins over whatever the config says."""
    path = _resolve(getattr(args, "config", None), CONFIG_ENV)
    rcfg = load_config(path).render if path else RenderConfig()
    if arch is not None:
        rcfg = RenderConfig.from_dict(
            rcfg.to_dict()
            | {
                "width": arch.image_size,
                "height": arch.image_size,
                "view_count": arch.view_count,
            }
        )
    return rcfg


# ---- subcommand bodies ----


def _cmd_gen_dataset(args):
    out = _resolve(args.out, OUT_ENV)
    if not out:
        raise ValidationError(f"needs --out or ${OUT_ENV}")
    classes = [c for c in (args.classes or "").split(",") if c] or None
    manifest = make_desk_dataset(
        out, classes=classes, per_class=args.per_class, seed=args.seed
    )
    _emit(
        {
            "out": out,
            "classes": len(manifest.classes),
            "models": len(manifest.rows),
            "manifest": os.path.join(out, "manifest.csv"),
        },
        args.pretty,
    )
    return 0


def _cmd_render(args):
    out = _resolve(args.out, OUT_ENV)
    if not out:
        raise ValidationError(f"needs --out or ${OUT_ENV}")
    mesh = _normalized_mesh(args.input)
    rcfg = _render_config(args)
    views = render_views(mesh, rcfg, seed=args.seed)
    save_viewset(views, out)
    _emit(
        {
            "input": args.input,
            "out": out,
            "views": len(views),
            "width": rcfg.width,
            "height": rcfg.height,
        },
        args.pretty,
    )
    return 0


def _cmd_sample(args):
    out = _resolve(args.out, OUT_ENV)
    if not out:
        raise ValidationError(f"needs --out or ${OUT_ENV}")
    cloud = sample_surface(load_obj(args.input), args.n, seed=args.seed)
    if args.normalize:
        cloud = normalize_unit_sphere(cloud)
    save_pointcloud(cloud, out)
    _emit(
        {"input": args.input, "out": out, "points": len(cloud.points)},
        args.pretty,
    )
    return 0


def _run_through(args, target):
    """Run pipeline stages in order up to ``target``; fresh stages no-op."""
    cfg = _load_experiment(args)
    if args.seed is not None:
        cfg.seed = args.seed
    report = None
    for stage in STAGES[: STAGES.index(target) + 1]:
        report = run_stage(cfg, stage, strict=args.strict)
    _emit(
        {
            "stage": target,
            "out_dir": cfg.out_dir,
            "reused": bool(report.get("reused", False)),
            "report": os.path.join(cfg.out_dir, f"stage_{target}.json"),
        },
        args.pretty,
    )
    return 0


def _query_feature(args, model):
    """Embed an OBJ or point-cloud file the same way the pipeline would."""
    branch = model.arch.branch
    if args.input.endswith(".obj"):
        mesh = _normalized_mesh(args.input)
        vs = None
        if branch in ("joint", "image"):
            vs = render_views(mesh, _render_config(args, model.arch), seed=args.seed)
        pc = None
        if branch in ("joint", "point"):
            pc = normalize_unit_sphere(
                sample_surface(mesh, model.arch.n_points, seed=args.seed)
            )
        return model.feature(vs=vs, pc=pc)
    if branch != "point":
        raise ValidationError(
            f"a {branch} model needs rendered views; pass an .obj so the "
            "views can be rendered, not a bare point cloud"
        )
    return model.feature(pc=load_pointcloud(args.input))


def _cmd_query(args):
    catalog = load_catalog(args.catalog)
    model, _ = load_checkpoint(args.model)
    if model.arch.branch != catalog.modality:
        raise ValidationError(
            f"catalog holds {catalog.modality} features but the model "
            f"encodes {model.arch.branch}"
        )
    feat = _query_feature(args, model)
    result = query(catalog, feat, k=args.k, query_id=os.path.basename(args.input))
    for model_id, distance in result.ranked:
        print(json.dumps({"model_id": model_id, "distance": distance}))
    return 0


def _cmd_pca(args):
    out = _resolve(args.out, OUT_ENV)
    if not out:
        raise ValidationError(f"needs --out or ${OUT_ENV}")
    catalog = load_catalog(args.catalog)
    stem = out[: -len(".csv")] if out.endswith(".csv") else out
    var_path = stem + "_variance.json"
    _, ratios = export_pca_csv(catalog, out, var_path, dims=args.dims)
    _emit(
        {
            "out": out,
            "variance": var_path,
            "rows": len(catalog),
            "explained_variance_ratios": [round(float(r), 6) for r in ratios],
        },
        args.pretty,
    )
    return 0


def _cmd_distances(args):
    out = _resolve(args.out, OUT_ENV)
    if not out:
        raise ValidationError(f"needs --out or ${OUT_ENV}")
    catalog = load_catalog(args.catalog)
    source = load_catalog(args.queries) if args.queries else catalog
    queries = [
        CatalogEntry(
            source.model_ids[i],
            source.class_labels[i],
            _feature_of(source, i),
            source.provenances[i],
        )
        for i in range(len(source))
    ]
    table = pairwise_distances(catalog, queries)
    table.save_csv(out)
    _emit(
        {"out": out, "queries": len(table.query_ids), "catalog": len(table.catalog_ids)},
        args.pretty,
    )
    return 0


def _feature_of(catalog, i):
    from .encoders.network import FeatureVector

    return FeatureVector(catalog.features[i], catalog.modality)


def _read_csv_header(path):
    with open(path) as fh:
        return fh.readline().strip().split(",")


def _cmd_plot(args):
    out = _resolve(args.out, OUT_ENV)
    if not out:
        raise ValidationError(f"needs --out or ${OUT_ENV}")
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    header = _read_csv_header(args.input)
    kind = args.kind
    if kind == "auto":
        if header[:3] == ["id", "class", "provenance"]:
            kind = "scatter"
        elif header[:2] == ["corpus", "query_id"]:
            kind = "compare"
        elif header and header[0] == "query_id":
            kind = "hist"
        else:
            raise ValidationError(
                f"cannot infer plot kind from header {header[:3]}; pass --kind"
            )

    fig, ax = plt.subplots(figsize=(7, 5))
    if kind == "scatter":
        rows = np.genfromtxt(
            args.input, delimiter=",", skip_header=1, dtype=str, ndmin=2
        )
        xy = rows[:, 3:5].astype(np.float64)
        for label in sorted(set(rows[:, 1])):
            pick = rows[:, 1] == label
            ax.scatter(xy[pick, 0], xy[pick, 1], s=14, label=label)
        ax.legend(fontsize=8)
        ax.set_xlabel(header[3])
        ax.set_ylabel(header[4])
    elif kind == "compare":
        rows = np.genfromtxt(
            args.input, delimiter=",", skip_header=1, dtype=str, ndmin=2
        )
        clean = rows[:, 2].astype(np.float64)
        occluded = rows[:, 3].astype(np.float64)
        ax.hist(clean, bins=args.bins, alpha=0.6, label="clean")
        ax.hist(occluded, bins=args.bins, alpha=0.6, label="occluded")
        ax.legend()
        ax.set_xlabel("nearest-match distance")
        ax.set_ylabel("count")
    else:
        matrix = np.genfromtxt(args.input, delimiter=",", skip_header=1, ndmin=2)[:, 1:]
        ax.hist(matrix.ravel(), bins=args.bins)
        ax.set_xlabel("distance")
        ax.set_ylabel("count")
    fig.tight_layout()
    fig.savefig(out, dpi=120)
    plt.close(fig)
    _emit({"out": out, "kind": kind, "input": args.input}, args.pretty)
    return 0


# ---- parser ----


def _add_common(sub, out=True, seed=True, config=False, seed_default=0):
    sub.add_argument("--pretty", action="store_true", help="human-readable output")
    if out:
        sub.add_argument("--out", help=f"output path (or ${OUT_ENV})")
    if seed:
        sub.add_argument("--seed", type=int, default=seed_default, help="random seed")
    if config:
        sub.add_argument("--config", help=f"experiment config (or ${CONFIG_ENV})")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="cadmatch",
        description="Shape classification and nearest-CAD-model retrieval.",
    )
    sub = parser.add_subparsers(dest="subcommand", metavar="subcommand")

    p = sub.add_parser("gen-dataset", help="generate the procedural part dataset")
    p.add_argument("--classes", help="comma-separated class names (default: all)")
    p.add_argument("--per-class", type=int, default=40)
    _add_common(p)
    p.set_defaults(func=_cmd_gen_dataset)

    p = sub.add_parser("render", help="render an OBJ into a view set")
    p.add_argument("--input", required=True, help="OBJ file")
    _add_common(p, config=True)
    p.set_defaults(func=_cmd_render)

    p = sub.add_parser("sample", help="sample surface points from an OBJ")
    p.add_argument("--input", required=True, help="OBJ file")
    p.add_argument("--n", type=int, default=2048, help="points to draw")
    p.add_argument("--normalize", action="store_true",
                   help="center and scale the cloud to the unit sphere")
    _add_common(p)
    p.set_defaults(func=_cmd_sample)

    for name, target, blurb in (
        ("train", "train", "train the encoders (runs prepare first when needed)"),
        ("index", "index", "build feature catalogs from trained encoders"),
        ("eval", "evaluate", "score retrieval, occlusion and threshold metrics"),
    ):
        p = sub.add_parser(name, help=blurb)
        p.add_argument("--strict", action="store_true",
                       help="fail instead of warn when upstream artifacts are stale")
        # seed defaults to None here: unset means keep the config's seed
        _add_common(p, config=True, seed_default=None)
        p.set_defaults(func=lambda a, _t=target: _run_through(a, _t))

    p = sub.add_parser("query", help="rank catalog models nearest to an input shape")
    p.add_argument("--catalog", required=True, help="catalog file")
    p.add_argument("--model", required=True, help="encoder checkpoint")
    p.add_argument("--input", required=True, help="OBJ or point-cloud file")
    p.add_argument("-k", type=int, default=3, help="neighbors to print")
    _add_common(p, out=False, config=True)
    p.set_defaults(func=_cmd_query)

    p = sub.add_parser("pca", help="project catalog features to CSV coordinates")
    p.add_argument("--catalog", required=True)
    p.add_argument("--dims", type=int, default=2)
    _add_common(p, seed=False)
    p.set_defaults(func=_cmd_pca)

    p = sub.add_parser("distances", help="pairwise query/catalog distance CSV")
    p.add_argument("--catalog", required=True)
    p.add_argument("--queries", help="second catalog to use as queries")
    _add_common(p, seed=False)
    p.set_defaults(func=_cmd_distances)

    p = sub.add_parser("plot", help="turn exported CSVs into PNG figures")
    p.add_argument("--input", required=True, help="CSV from pca/distances/eval")
    p.add_argument("--kind", choices=("auto", "scatter", "hist", "compare"),
                   default="auto")
    p.add_argument("--bins", type=int, default=40)
    _add_common(p, seed=False)
    p.set_defaults(func=_cmd_plot)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "subcommand", None):
        parser.print_usage(sys.stderr)
        return 2
    try:
        return args.func(args)
    except CadmatchError as exc:
        print(
            json.dumps({"error": type(exc).__name__, "message": str(exc)}),
            file=sys.stderr,
        )
        return 1
    except OSError as exc:
        print(
            json.dumps({"error": type(exc).__name__, "message": str(exc)}),
            file=sys.stderr,
        )
        return 1


if __name__ == "__main__":
    sys.exit(main())
