import numpy as np
import pytest

from cadmatch.errors import ValidationError
from cadmatch.geometry import (
    PointCloud,
    load_pointcloud,
    load_pointcloud_csv,
    save_pointcloud,
    save_pointcloud_csv,
)


def _cloud(n=128, seed=0):
    return PointCloud(np.random.default_rng(seed).normal(size=(n, 3)), source_id="c")


def test_binary_roundtrip_exact_float32(tmp_path):
    pc = _cloud()
    path = tmp_path / "c.pcb"
    save_pointcloud(pc, path)
    back = load_pointcloud(path)
    np.testing.assert_array_equal(back.points, pc.points.astype(np.float32))


def test_binary_header_layout(tmp_path):
    pc = _cloud(n=5)
    path = tmp_path / "c.pcb"
    save_pointcloud(pc, path)
    blob = path.read_bytes()
    assert blob[:4] == b"PCB1"
    assert np.frombuffer(blob[4:12], dtype="<u4").tolist() == [5, 3]
    assert len(blob) == 12 + 5 * 3 * 4


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "junk.pcb"
    path.write_bytes(b"NOPE" + b"\x00" * 20)
    with pytest.raises(ValidationError):
        load_pointcloud(path)


def test_truncated_payload_rejected(tmp_path):
    pc = _cloud(n=4)
    path = tmp_path / "c.pcb"
    save_pointcloud(pc, path)
    path.write_bytes(path.read_bytes()[:-4])
    with pytest.raises(ValidationError):
        load_pointcloud(path)


def test_csv_roundtrip(tmp_path):
    pc = _cloud(n=37, seed=1)
    path = tmp_path / "c.csv"
    save_pointcloud_csv(pc, path)
    back = load_pointcloud_csv(path)
    np.testing.assert_allclose(back.points, pc.points, rtol=0, atol=1e-7)


def test_csv_comments_and_blank_lines_skipped(tmp_path):
    path = tmp_path / "c.csv"
    path.write_text("# header\n\n1,2,3\n# mid\n4,5,6\n")
    back = load_pointcloud_csv(path)
    np.testing.assert_array_equal(back.points, [[1, 2, 3], [4, 5, 6]])


def test_csv_bad_row_names_line(tmp_path):
    path = tmp_path / "c.csv"
    path.write_text("1,2,3\n4,5\n")
    with pytest.raises(ValidationError) as exc:
        load_pointcloud_csv(path)
    assert ":2" in str(exc.value)


def test_source_id_defaults_to_stem(tmp_path):
    pc = _cloud(n=3)
    path = tmp_path / "widget.pcb"
    save_pointcloud(pc, path)
    assert load_pointcloud(path).source_id == "widget"
