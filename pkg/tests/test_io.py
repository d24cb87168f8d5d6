import json

import numpy as np
import pytest

from skewlab.config import Config
from skewlab.family import LocusLabel
from skewlab.io import (
    BLACK,
    RED,
    WHITE,
    ArtifactWriter,
    dumps,
    escape_image,
    locus_image,
    mark_points,
    read_cloud_csv,
    read_grid,
    read_ppm,
    write_cloud_csv,
    write_curves_csv,
    write_grid,
    write_ppm,
)
from skewlab.julia import GridSpec, PointCloud, filled_julia_base
from skewlab.numeric import Poly


@pytest.fixture
def disk():
    return filled_julia_base(Poly.monomial(2), GridSpec.box(-2.0, 2.0, -1.0, 1.0, 9, 5), maxiter=20)


def test_escape_image(disk):
    rgb = escape_image(disk)
    assert rgb.shape == (5, 9, 3)
    assert tuple(rgb[2, 4]) == BLACK
    assert tuple(rgb[0, 0]) == WHITE


def test_locus_image():
    labels = np.array([[LocusLabel.Connected, LocusLabel.BoundaryWithinTol]])
    rgb = locus_image(labels)
    assert tuple(rgb[0, 0]) == BLACK
    assert tuple(rgb[0, 1]) == RED


def test_mark_points_skips_outside(disk):
    rgb = mark_points(escape_image(disk), disk.spec, np.array([0j, 10 + 0j]))
    assert tuple(rgb[2, 4]) == RED
    assert (rgb == RED).all(axis=2).sum() == 1


def test_ppm_round_trip(tmp_path, disk):
    rgb = escape_image(disk)
    path = write_ppm(tmp_path / "disk.ppm", rgb)
    assert path.read_bytes().startswith(b"P6\n9 5\n255\n")
    np.testing.assert_array_equal(read_ppm(path), rgb)
    with pytest.raises(ValueError):
        write_ppm(tmp_path / "flat.ppm", rgb[..., 0])


def test_read_ppm_with_comments_and_spaces(tmp_path):
    pixels = np.arange(2 * 3 * 3, dtype=np.uint8).reshape(2, 3, 3)
    path = tmp_path / "spaced.ppm"
    path.write_bytes(b"P6\n# written elsewhere\n3   2\n255\n" + pixels.tobytes())
    np.testing.assert_array_equal(read_ppm(path), pixels)


def test_read_ppm_rejects_other_files(tmp_path):
    path = tmp_path / "grid.ppm"
    path.write_bytes(b"not an image")
    with pytest.raises(ValueError):
        read_ppm(path)


def test_grid_round_trip(tmp_path, disk):
    spec, iters = read_grid(write_grid(tmp_path / "disk.grid", disk))
    assert spec.bounds == pytest.approx(disk.spec.bounds)
    assert (spec.nx, spec.ny) == (9, 5)
    np.testing.assert_array_equal(iters, disk.iters)


def test_cloud_csv(tmp_path):
    base = PointCloud(np.array([1.0 + 2.0j, -0.5j]))
    path = write_cloud_csv(tmp_path / "base.csv", base)
    assert path.read_text().splitlines()[0] == "re,im"
    np.testing.assert_array_equal(read_cloud_csv(path), base.pts)
    pairs = PointCloud(np.array([[1.0, 2.0j]]))
    path = write_cloud_csv(tmp_path / "pairs.csv", pairs)
    assert path.read_text().splitlines()[0] == "re,im,wre,wim"
    np.testing.assert_array_equal(read_cloud_csv(path), pairs.pts)


def test_curves_csv(tmp_path):
    path = write_curves_csv(tmp_path / "curves.csv", {"b": np.array([[0.0, 1.0, 2.0]]), "a": np.zeros((2, 3))})
    lines = path.read_text().splitlines()
    assert lines[0] == "curve,t,a,b"
    assert [line.split(",")[0] for line in lines[1:]] == ["a", "a", "b"]


def test_dumps_handles_complex_and_arrays():
    text = dumps({"z": 1 + 2j, "v": np.array([1, 2]), "x": np.float64(0.5)})
    assert json.loads(text) == {"v": [1, 2], "x": 0.5, "z": [1.0, 2.0]}


def test_artifact_writer_manifest(tmp_path, disk):
    config = Config(threads=2, output_dir=tmp_path)
    writer = ArtifactWriter(tmp_path, "render-base", config)
    writer.image("disk", escape_image(disk))
    writer.grid("disk", disk)
    manifest = writer.finish({"poly": "z2"})
    assert [o.path for o in manifest.outputs] == ["disk.ppm", "disk.grid"]
    assert manifest.threads == 2
    stored = json.loads((tmp_path / "manifest.json").read_text())
    assert stored["command"] == "render-base"
    assert stored["input_hash"] == manifest.input_hash


def test_artifact_writer_hash_is_reproducible(tmp_path, disk):
    hashes = []
    for name in ("one", "two"):
        writer = ArtifactWriter(tmp_path / name, "render-base", Config(threads=1, output_dir=tmp_path))
        writer.grid("disk", disk)
        manifest = writer.finish()
        hashes.append((manifest.input_hash, manifest.outputs[0].sha256))
    assert hashes[0] == hashes[1]
