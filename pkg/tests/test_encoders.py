import numpy as np
import pytest

from cadmatch.encoders import (
    ArchConfig,
    FeatureVector,
    JointModel,
    classify_views,
    load_checkpoint,
    save_checkpoint,
)
from cadmatch.errors import ShapeError, ValidationError
from cadmatch.geometry import PointCloud
from cadmatch.render import Image, ViewSet

TINY = dict(
    image_size=32,
    view_count=2,
    n_points=256,
    d_img=16,
    d_pts=16,
    point_widths=(8, 8, 16),
    stem_channels=4,
    block_channels=(6, 8, 8),
    head_channels=8,
    expansion=2,
)


def _model(branch="joint", seed=0, **overrides):
    cfg = dict(TINY, n_classes=4, branch=branch)
    cfg.update(overrides)
    return JointModel(ArchConfig(**cfg), seed=seed)


def _cloud(n=256, seed=0):
    return PointCloud(np.random.default_rng(seed).normal(size=(n, 3)), source_id="pc")


def _views(k=2, side=32, seed=0, value=None):
    rng = np.random.default_rng(seed)
    imgs = []
    for _ in range(k):
        data = np.full((side, side), value) if value is not None else rng.random((side, side))
        imgs.append(Image(data.astype(np.float32)))
    return ViewSet(imgs, model_id="vs")


def test_point_feature_bitwise_permutation_invariant():
    model = _model("point")
    pc = _cloud()
    base = model.encode_points(pc).values.tobytes()
    rng = np.random.default_rng(1)
    for _ in range(10):
        shuffled = PointCloud(pc.points[rng.permutation(len(pc))], source_id="pc")
        assert model.encode_points(shuffled).values.tobytes() == base


def test_point_feature_invariant_to_duplicate_multiset():
    # a multiset with every point twice encodes the same however it is ordered
    rng = np.random.default_rng(2)
    half = rng.normal(size=(128, 3))
    doubled = np.concatenate([half, half])
    model = _model("point")
    a = model.encode_points(PointCloud(doubled))
    b = model.encode_points(PointCloud(doubled[rng.permutation(256)]))
    assert a.values.tobytes() == b.values.tobytes()


def test_distinct_clouds_encode_distinctly():
    model = _model("point")
    a = model.encode_points(_cloud(seed=3))
    b = model.encode_points(PointCloud(_cloud(seed=3).points * 0.2 + 2.0))
    assert np.linalg.norm(a.values - b.values) > 0


def test_wrong_point_count_rejected():
    model = _model("point")
    with pytest.raises(ShapeError):
        model.encode_points(_cloud(n=100))


def test_view_feature_mean_of_identical_views_matches_single():
    model = _model("image")
    one = _views(k=1, value=0.7)
    four = ViewSet(list(one.images) * 4, model_id="vs")
    np.testing.assert_allclose(
        model.encode_views(four).values, model.encode_views(one).values, atol=1e-6
    )


def test_view_feature_order_invariant():
    model = _model("image")
    vs = _views(k=2, seed=4)
    swapped = ViewSet(vs.images[::-1], model_id="vs")
    np.testing.assert_allclose(
        model.encode_views(vs).values, model.encode_views(swapped).values, atol=1e-7
    )


def test_zero_and_one_images_differ():
    model = _model("image")
    f0 = model.encode_views(_views(k=1, value=0.0))
    f1 = model.encode_views(_views(k=1, value=1.0))
    assert np.linalg.norm(f0.values - f1.values) > 0


def test_mixed_view_shapes_rejected():
    with pytest.raises(ShapeError):
        ViewSet([Image(np.zeros((32, 32), np.float32)), Image(np.zeros((16, 16), np.float32))])
    model = _model("image")
    with pytest.raises(ShapeError):
        model.encode_views(_views(k=1, side=16))


def test_joint_feature_concatenation_order():
    model = _model("joint")
    fi = FeatureVector(np.arange(16, dtype=float), "image", "a")
    fp = FeatureVector(np.arange(100, 116, dtype=float), "point", "a")
    joint = model.joint_feature(fi, fp)
    assert joint.modality == "joint"
    assert len(joint.values) == 32
    np.testing.assert_array_equal(joint.values[:16], fi.values)
    np.testing.assert_array_equal(joint.values[16:], fp.values)


def test_joint_feature_modality_checked():
    model = _model("joint")
    fp = FeatureVector(np.zeros(16), "point", "a")
    with pytest.raises(ValidationError):
        model.joint_feature(fp, fp)


def test_nonfinite_feature_rejected():
    with pytest.raises(ValidationError):
        FeatureVector(np.array([1.0, np.nan]), "image")


def test_classify_views_uniform_product():
    out = classify_views([[0.5, 0.5]] * 4)
    np.testing.assert_array_equal(out, [0.5, 0.5])


def test_classify_views_symmetry():
    out = classify_views([[0.6, 0.4], [0.4, 0.6]])
    assert abs(out[0] - 0.5) < 1e-12
    assert abs(out[1] - 0.5) < 1e-12


def test_classify_views_one_hot_absorbs():
    out = classify_views([[1.0, 0.0], [0.3, 0.7], [0.8, 0.2]])
    np.testing.assert_array_equal(out, [1.0, 0.0])


def test_classify_views_order_invariant():
    views = [[0.2, 0.8], [0.55, 0.45], [0.9, 0.1]]
    np.testing.assert_allclose(
        classify_views(views), classify_views(views[::-1]), atol=1e-15
    )


def test_classify_views_log_space_survives_underflow():
    # 200 uniform views over 1000 classes underflow a direct product to 0
    m, k = 1000, 200
    out = classify_views([np.full(m, 1.0 / m)] * k)
    np.testing.assert_allclose(out, np.full(m, 1.0 / m), atol=1e-12)


def test_classify_views_disjoint_support_falls_back_to_uniform():
    out = classify_views([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    np.testing.assert_allclose(out, [1 / 3, 1 / 3, 1 / 3], atol=1e-15)


def test_classify_views_rejects_non_simplex():
    with pytest.raises(ValidationError):
        classify_views([[0.7, 0.7]])
    with pytest.raises(ValidationError):
        classify_views([[1.2, -0.2]])


def test_zero_head_gives_uniform_and_class_zero():
    model = _model("joint")
    head = model.groups["joint_head"].layers[0][1]
    head.params["w"][:] = 0
    head.params["b"][:] = 0
    label, probs, feat = model.classify(vs=_views(), pc=_cloud())
    assert label == 0
    np.testing.assert_allclose(probs, 0.25, atol=1e-12)
    assert feat.modality == "joint"


def test_probabilities_sum_to_one():
    model = _model("joint")
    for seed in range(3):
        _, probs, _ = model.classify(vs=_views(seed=seed), pc=_cloud(seed=seed))
        assert abs(probs.sum() - 1.0) < 1e-6


def test_per_view_probs_shape():
    model = _model("joint")
    probs = model.per_view_probs(_views(k=2), pc=_cloud())
    assert len(probs) == 2
    for p in probs:
        assert abs(p.sum() - 1.0) < 1e-6


@pytest.mark.parametrize("branch", ["joint", "image", "point"])
def test_checkpoint_roundtrip(branch, tmp_path):
    model = _model(branch, seed=7)
    path = tmp_path / "w.cmw"
    save_checkpoint(model, path, extra={"note": "test"})
    again, header = load_checkpoint(path)
    assert header["extra"]["note"] == "test"
    assert again.arch == model.arch
    state_a, state_b = model.state(), again.state()
    assert sorted(state_a) == sorted(state_b)
    for name in state_a:
        np.testing.assert_array_equal(state_a[name], state_b[name])


def test_checkpoint_bytes_deterministic(tmp_path):
    model = _model("joint", seed=9)
    p1, p2 = tmp_path / "a.cmw", tmp_path / "b.cmw"
    save_checkpoint(model, p1)
    save_checkpoint(model, p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_checkpoint_bad_magic(tmp_path):
    path = tmp_path / "junk.cmw"
    path.write_bytes(b"XXXX" + b"\x00" * 64)
    with pytest.raises(ValidationError):
        load_checkpoint(path)


def test_checkpoint_truncated(tmp_path):
    model = _model("point")
    path = tmp_path / "w.cmw"
    save_checkpoint(model, path)
    path.write_bytes(path.read_bytes()[:-10])
    with pytest.raises(ValidationError):
        load_checkpoint(path)


def test_load_state_rejects_mismatched_names():
    model = _model("point")
    state = model.state()
    state["bogus/extra.w"] = np.zeros(3, np.float32)
    with pytest.raises(ShapeError):
        model.load_state(state)


def test_same_seed_same_init():
    a, b = _model("joint", seed=5), _model("joint", seed=5)
    for name, val in a.state().items():
        np.testing.assert_array_equal(val, b.state()[name])
    c = _model("joint", seed=6)
    assert any(
        not np.array_equal(val, c.state()[name]) for name, val in a.state().items()
    )
