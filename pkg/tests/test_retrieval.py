import numpy as np
import pytest

from cadmatch.encoders import FeatureVector
from cadmatch.errors import ConflictError, ShapeError, ValidationError
from cadmatch.retrieval import (
    CatalogEntry,
    RetrievalResult,
    build_catalog,
    calibrate_threshold,
    load_catalog,
    match_decision,
    pairwise_distances,
    query,
    save_catalog,
)


def _fv(values, modality="joint"):
    return FeatureVector(values=np.asarray(values, dtype=np.float64), modality=modality)


def _entry(model_id, values, class_label="part", provenance="cad"):
    return CatalogEntry(
        model_id=model_id,
        class_label=class_label,
        feature=_fv(values),
        provenance=provenance,
    )


def _random_catalog(n, width, rng, integer=False):
    entries = []
    for i in range(n):
        vals = (
            rng.integers(0, 3, size=width).astype(np.float64)
            if integer
            else rng.normal(size=width)
        )
        entries.append(_entry(f"m{i:03d}", vals))
    return build_catalog(entries)


def test_build_catalog_of_two():
    cat = build_catalog([_entry("a", [0.0, 0.0]), _entry("b", [3.0, 4.0])])
    assert len(cat) == 2
    assert cat.width == 2
    assert cat.model_ids == ("a", "b")


def test_duplicate_model_id_is_a_conflict():
    with pytest.raises(ConflictError):
        build_catalog([_entry("a", [1.0]), _entry("a", [2.0])])


def test_mixed_widths_rejected():
    wide = _entry("b", np.zeros(512))
    with pytest.raises(ShapeError):
        build_catalog([_entry("a", np.zeros(256)), wide])


def test_empty_catalog_rejected():
    with pytest.raises(ValidationError):
        build_catalog([])


def test_mixed_modalities_rejected():
    img = CatalogEntry("b", "part", _fv([1.0, 2.0], modality="image"))
    with pytest.raises(ValidationError):
        build_catalog([_entry("a", [0.0, 0.0]), img])


def test_bad_provenance_rejected():
    with pytest.raises(ValidationError):
        _entry("a", [1.0], provenance="guessed")


def test_three_four_five_distances():
    cat = build_catalog([_entry("origin", [0.0, 0.0]), _entry("tip", [3.0, 4.0])])
    result = query(cat, _fv([0.0, 0.0]), k=2)
    assert result.ranked == (("origin", 0.0), ("tip", 5.0))


def test_identity_retrieval_lands_first_at_zero():
    rng = np.random.default_rng(0)
    cat = _random_catalog(20, 8, rng)
    probe = _fv(cat.features[7])
    result = query(cat, probe, k=3)
    assert result.ranked[0] == ("m007", 0.0)


def test_ties_keep_insertion_order():
    same = [_entry(f"dup{i}", [1.0, 1.0]) for i in range(5)]
    cat = build_catalog(same)
    result = query(cat, _fv([0.0, 0.0]), k=5)
    assert result.model_ids == ("dup0", "dup1", "dup2", "dup3", "dup4")


def test_k_beyond_size_returns_all():
    cat = build_catalog([_entry("a", [0.0]), _entry("b", [1.0])])
    assert len(query(cat, _fv([0.0]), k=99).ranked) == 2


def test_k_below_one_rejected():
    cat = build_catalog([_entry("a", [0.0])])
    with pytest.raises(ValidationError):
        query(cat, _fv([0.0]), k=0)


def test_query_width_mismatch_rejected():
    cat = build_catalog([_entry("a", [0.0, 0.0])])
    with pytest.raises(ShapeError):
        query(cat, _fv([0.0, 0.0, 0.0]), k=1)


def test_query_modality_mismatch_rejected():
    cat = build_catalog([_entry("a", [0.0, 0.0])])
    with pytest.raises(ValidationError):
        query(cat, _fv([0.0, 0.0], modality="point"), k=1)


def test_oracle_equivalence_with_ties():
    # integer-grid features force exact distance ties; the reference ranking
    # is an exhaustive sort keyed on (distance, insertion index)
    rng = np.random.default_rng(42)
    for trial in range(50):
        cat = _random_catalog(200, 4, rng, integer=True)
        probe = _fv(rng.integers(0, 3, size=4).astype(np.float64))
        dists = np.sqrt(((cat.features - probe.values) ** 2).sum(axis=1))
        oracle = sorted(range(200), key=lambda i: (dists[i], i))
        result = query(cat, probe, k=200)
        assert result.model_ids == tuple(cat.model_ids[i] for i in oracle)
        assert [d for _, d in result.ranked] == [float(dists[i]) for i in oracle]


def test_result_invariants_enforced():
    with pytest.raises(ValidationError):
        RetrievalResult("q", (("a", 1.0), ("b", 0.5)))
    with pytest.raises(ValidationError):
        RetrievalResult("q", (("a", 0.5), ("a", 1.0)))


def test_catalog_roundtrip_preserves_queries(tmp_path):
    rng = np.random.default_rng(3)
    cat = _random_catalog(50, 16, rng)
    path = tmp_path / "parts.cat"
    save_catalog(cat, path)
    loaded = load_catalog(path)
    assert loaded.model_ids == cat.model_ids
    assert loaded.class_labels == cat.class_labels
    assert loaded.provenances == cat.provenances
    assert loaded.modality == cat.modality
    probe = _fv(rng.normal(size=16))
    assert query(loaded, probe, k=50).ranked == query(cat, probe, k=50).ranked


def test_catalog_file_rejects_bad_magic(tmp_path):
    path = tmp_path / "parts.cat"
    save_catalog(build_catalog([_entry("a", [1.0])]), path)
    raw = path.read_bytes()
    path.write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(ValidationError):
        load_catalog(path)


def test_catalog_file_rejects_truncation(tmp_path):
    path = tmp_path / "parts.cat"
    save_catalog(build_catalog([_entry("a", [1.0, 2.0])]), path)
    raw = path.read_bytes()
    path.write_bytes(raw[:-4])
    with pytest.raises(ValidationError):
        load_catalog(path)


def test_pairwise_diagonal_and_symmetry():
    rng = np.random.default_rng(7)
    cat = _random_catalog(30, 8, rng)
    entries = [
        _entry(mid, cat.features[i]) for i, mid in enumerate(cat.model_ids)
    ]
    table = pairwise_distances(cat, entries)
    assert np.allclose(np.diag(table.matrix), 0.0, atol=1e-9)
    assert np.allclose(table.matrix, table.matrix.T, atol=1e-9)


def test_pairwise_triangle_inequality_on_sampled_triples():
    rng = np.random.default_rng(11)
    cat = _random_catalog(40, 6, rng)
    entries = [_entry(m, cat.features[i]) for i, m in enumerate(cat.model_ids)]
    d = pairwise_distances(cat, entries).matrix
    for _ in range(500):
        i, j, k = rng.integers(0, 40, size=3)
        assert d[i, k] <= d[i, j] + d[j, k] + 1e-9


def test_pairwise_summary_and_csv(tmp_path):
    cat = build_catalog([_entry("a", [0.0, 0.0]), _entry("b", [3.0, 4.0])])
    probe = _entry("q1", [0.0, 0.0], provenance="scanned")
    table = pairwise_distances(cat, [probe])
    rows = table.summary()
    assert rows[0]["min"] == 0.0
    assert rows[0]["mean"] == pytest.approx(2.5)
    assert rows[0]["nearest"] == "a"
    path = tmp_path / "dist.csv"
    table.save_csv(path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "query_id,a,b"
    assert lines[1] == "q1,0,5"


def test_match_decision_boundary_is_inclusive():
    assert match_decision(0.0, 1e-9) == "positive"
    assert match_decision(10.0, 10.0) == "positive"
    assert match_decision(14.0, 10.0) == "negative"


def test_match_decision_validates_inputs():
    with pytest.raises(ValidationError):
        match_decision(-0.1, 10.0)
    with pytest.raises(ValidationError):
        match_decision(1.0, 0.0)


def test_calibration_on_separable_distances():
    d = [1.0, 2.0, 3.0, 5.0, 6.0]
    pos = [True, True, True, False, False]
    t, f1 = calibrate_threshold(d, pos)
    assert t == 3.0
    assert f1 == 1.0


def test_calibration_matches_brute_force_oracle():
    rng = np.random.default_rng(5)
    d = np.round(rng.uniform(0, 10, size=80), 1)
    pos = rng.random(80) < 0.5
    if not pos.any():
        pos[0] = True
    t, f1 = calibrate_threshold(d, pos)

    def oracle_f1(t):
        pred = d <= t
        tp = np.count_nonzero(pred & pos)
        fp = np.count_nonzero(pred & ~pos)
        fn = np.count_nonzero(~pred & pos)
        p = tp / (tp + fp) if tp + fp else 0.0
        r = tp / (tp + fn) if tp + fn else 0.0
        return 2 * p * r / (p + r) if p + r else 0.0

    best = max(oracle_f1(c) for c in np.unique(d))
    assert f1 == pytest.approx(best)
    assert oracle_f1(t) == pytest.approx(best)


def test_calibration_rejects_degenerate_input():
    with pytest.raises(ValidationError):
        calibrate_threshold([], [])
    with pytest.raises(ValidationError):
        calibrate_threshold([1.0, 2.0], [False, False])
    with pytest.raises(ValidationError):
        calibrate_threshold([-1.0], [True])
