"""End-to-end pipeline behavior on a miniature corpus.

One module-scoped tiny run (2 classes x 4 models, 16px, 64 points, 1+1
epochs) backs most assertions; config parsing and failure paths get their
own throwaway directories.
"""

import json
import os

import numpy as np
import pytest

from cadmatch.datasets import make_desk_dataset, stratified_split
from cadmatch.errors import (
    ContaminationError,
    DependencyError,
    StalenessError,
    ValidationError,
)
from cadmatch.pipeline import (
    ExperimentConfig,
    config_hash,
    load_config,
    pretrain_then_transfer,
    run_all,
    run_stage,
)


def _tiny_config(out_dir, seed=0):
    return ExperimentConfig.from_dict(
        {
            "out_dir": str(out_dir),
            "seed": seed,
            "dataset": {"kind": "desk", "classes": ["washer", "bracket"],
                        "per_class": 4, "train_fraction": 0.75},
            "render": {"width": 16, "height": 16, "view_count": 2},
            "sampling": {"n_points": 64},
            "arch": {"d_img": 8, "d_pts": 8, "point_widths": [8, 8],
                     "stem_channels": 2, "block_channels": [2, 4, 4],
                     "head_channels": 4, "expansion": 2},
            "train": {"phase1_epochs": 1, "phase2_epochs": 1, "batch_size": 4},
            "retrieval": {"ks": [1, 3]},
        }
    )


@pytest.fixture(scope="module")
def tiny_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("tiny")
    cfg = _tiny_config(out)
    reports = run_all(cfg)
    return cfg, reports


# ---- config parsing ----


def test_config_toml_and_json_agree(tmp_path):
    toml_path = tmp_path / "cfg.toml"
    toml_path.write_text(
        'out_dir = "%s"\nseed = 7\n[sampling]\nn_points = 128\n'
        "[render]\nwidth = 32\nheight = 32\n" % tmp_path
    )
    json_path = tmp_path / "cfg.json"
    json_path.write_text(
        json.dumps(
            {
                "out_dir": str(tmp_path),
                "seed": 7,
                "sampling": {"n_points": 128},
                "render": {"width": 32, "height": 32},
            }
        )
    )
    a = load_config(toml_path)
    b = load_config(json_path)
    assert a.seed == b.seed == 7
    assert a.sampling.n_points == b.sampling.n_points == 128
    assert config_hash(a) == config_hash(b)


def test_config_rejects_unknown_keys(tmp_path):
    with pytest.raises(ValidationError, match="unknown config keys"):
        ExperimentConfig.from_dict({"out_dir": "x", "typo_section": {}})
    with pytest.raises(ValidationError, match="unknown arch keys"):
        ExperimentConfig.from_dict({"out_dir": "x", "arch": {"d_imgg": 4}})


def test_config_requires_out_dir():
    with pytest.raises(ValidationError, match="out_dir"):
        ExperimentConfig.from_dict({"seed": 1})


def test_config_rejects_other_extensions(tmp_path):
    path = tmp_path / "cfg.yaml"
    path.write_text("out_dir: x\n")
    with pytest.raises(ValidationError, match="toml or .json"):
        load_config(path)


def test_config_hash_ignores_section_order(tmp_path):
    d = {"out_dir": "x", "seed": 3, "sampling": {"n_points": 64}}
    flipped = {"sampling": {"n_points": 64}, "seed": 3, "out_dir": "x"}
    assert config_hash(ExperimentConfig.from_dict(d)) == config_hash(
        ExperimentConfig.from_dict(flipped)
    )


# ---- stage ordering and reuse ----


def test_stage_needs_upstream(tmp_path):
    cfg = _tiny_config(tmp_path / "fresh")
    with pytest.raises(DependencyError, match="needs 'index'"):
        run_stage(cfg, "evaluate")


def test_unknown_stage_rejected(tmp_path):
    cfg = _tiny_config(tmp_path / "fresh")
    with pytest.raises(ValidationError, match="stage must be one of"):
        run_stage(cfg, "deploy")


def test_all_stage_reports_written(tiny_run):
    cfg, reports = tiny_run
    for stage in ("prepare", "train", "index", "evaluate"):
        path = os.path.join(cfg.out_dir, f"stage_{stage}.json")
        assert os.path.exists(path), stage
        assert reports[stage]["config_hash"] == config_hash(cfg)
        assert reports[stage]["reused"] is False


def test_rerun_is_noop_and_byte_stable(tiny_run):
    cfg, _ = tiny_run
    metrics_path = os.path.join(cfg.out_dir, "metrics.json")
    before = open(metrics_path, "rb").read()
    report = run_stage(cfg, "evaluate")
    assert report["reused"] is True
    assert open(metrics_path, "rb").read() == before


def test_stale_upstream_warns_then_raises(tiny_run, tmp_path):
    cfg, _ = tiny_run
    changed = _tiny_config(cfg.out_dir, seed=1)
    with pytest.warns(UserWarning, match="was built from config"):
        run_stage(changed, "train")
    # training under the changed config leaves 'train' stale for the original
    with pytest.raises(StalenessError):
        run_stage(_tiny_config(cfg.out_dir), "index", strict=True)
    # restore downstream artifacts for the other module-scoped tests
    run_all(_tiny_config(cfg.out_dir))


def test_evaluate_cites_checkpoint_hashes(tiny_run):
    cfg, reports = tiny_run
    cited = reports["evaluate"]["checkpoint_hashes"]
    assert cited == reports["index"]["checkpoint_hashes"]
    assert set(cited) == {"joint", "image", "point"}
    # and those hashes are the train stage's recorded output digests
    for branch, rel in reports["train"]["checkpoints"].items():
        assert cited[branch] == reports["train"]["files"][rel]


def test_evaluate_reports_both_catalog_scopes(tiny_run):
    _, reports = tiny_run
    ev = reports["evaluate"]
    for table in (ev["retrieval_topk"], ev["retrieval_topk_full_library"]):
        assert set(table) == {"joint", "image", "point"}
        for branch in table:
            ks = sorted(int(k) for k in table[branch])
            assert ks == [1, 3]
            vals = [table[branch][str(k)] for k in ks]
            assert vals == sorted(vals)  # top-1 <= top-3


def test_evaluate_emits_expected_files(tiny_run):
    cfg, _ = tiny_run
    for rel in (
        "metrics.json",
        "pca.csv",
        "pca_variance.json",
        os.path.join("sensitivity", "sensitivity.json"),
        os.path.join("sensitivity", "partial_scan.csv"),
    ):
        assert os.path.exists(os.path.join(cfg.out_dir, rel)), rel
    header = open(os.path.join(cfg.out_dir, "pca.csv")).readline().strip()
    assert header == "id,class,provenance,x,y"


def test_identical_runs_byte_identical_metrics(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    run_all(_tiny_config(a))
    run_all(_tiny_config(b))
    bytes_a = open(a / "metrics.json", "rb").read()
    bytes_b = open(b / "metrics.json", "rb").read()
    assert bytes_a == bytes_b


# ---- transfer ----


def _corpus(tmp_path, name, classes, seed):
    manifest = make_desk_dataset(
        str(tmp_path / name), classes=classes, per_class=3, seed=seed
    )
    return stratified_split(manifest, 0.67, seed)


def test_transfer_rejects_shared_model_ids(tmp_path):
    cfg = _tiny_config(tmp_path / "out")
    src = _corpus(tmp_path, "src", ["washer", "bracket"], 0)
    dup = _corpus(tmp_path, "dup", ["washer", "bracket"], 0)
    with pytest.raises(ContaminationError, match="both corpora"):
        pretrain_then_transfer(src, dup, cfg)


def test_transfer_keeps_backbones_reinits_head(tmp_path):
    cfg = _tiny_config(tmp_path / "out")
    src = _corpus(tmp_path, "src", ["washer", "bracket"], 0)
    tgt = _corpus(tmp_path, "tgt", ["pipe", "elbow"], 5)
    model, catalog, report = pretrain_then_transfer(src, tgt, cfg)

    src_model, _ = _retrain_source(src, cfg)
    state = model.state()
    src_state = src_model.state()
    for name in state:
        if name.split("/")[0] == "joint_head":
            continue
        np.testing.assert_array_equal(state[name], src_state[name], err_msg=name)
    head_keys = [n for n in state if n.split("/")[0] == "joint_head"]
    assert head_keys
    assert any(not np.array_equal(state[n], src_state[n]) for n in head_keys)

    assert report["head_reinitialized"] is True
    assert len(catalog) == len(tgt.rows)
    assert set(report["sensitivity"]["corpora"]) == {"transfer"}


def _retrain_source(src, cfg):
    from cadmatch.pipeline.transfer import _train_on

    return _train_on(src, src.subset("train"), cfg)


def test_transfer_baseline_adds_second_corpus(tmp_path):
    cfg = _tiny_config(tmp_path / "out")
    src = _corpus(tmp_path, "src", ["washer", "bracket"], 0)
    tgt = _corpus(tmp_path, "tgt", ["pipe", "elbow"], 5)
    _, _, report = pretrain_then_transfer(src, tgt, cfg, with_baseline=True)
    assert set(report["sensitivity"]["corpora"]) == {"transfer", "target_trained"}
    assert report["baseline_training"] is not None
