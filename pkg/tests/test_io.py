import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from tomoprox import FanBeamGeometry, ImageGrid, ParallelBeamGeometry, Sinogram, Volume, uniform_angles
from tomoprox.errors import LengthMismatch
from tomoprox.io import (geometry_from_text, geometry_to_text, manifest_lines, read_pgm16,
                         read_sinogram_raw, read_volume_raw, write_manifest, write_pgm16,
                         write_sinogram_raw, write_volume_raw)

finite = st.floats(allow_nan=False, allow_infinity=False)


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, 12, elements=finite), st.floats(1e-6, 1e6))
def test_volume_raw_round_trip_is_bit_exact(tmp_path_factory, values, pixel):
    path = tmp_path_factory.mktemp("io") / "v.raw"
    v = Volume(ImageGrid(4, 3, pixel), values)
    write_volume_raw(path, v)
    back = read_volume_raw(path)
    assert back.grid == v.grid
    assert back.values.tobytes() == v.values.tobytes()


def test_raw_layout(tmp_path):
    path = tmp_path / "v.raw"
    write_volume_raw(path, Volume(ImageGrid(2, 1, 0.5), [1.0, -2.0]))
    blob = path.read_bytes()
    assert blob.startswith(b"2 1 0.5\n")
    assert blob[8:] == np.array([1.0, -2.0], dtype="<f8").tobytes()


def test_sinogram_round_trip(tmp_path):
    geom = ParallelBeamGeometry((0.0, 1.0, 2.0), 5, 1.0)
    s = Sinogram(geom, np.random.default_rng(0).standard_normal(15))
    path = tmp_path / "s.raw"
    write_sinogram_raw(path, s)
    assert path.read_bytes().startswith(b"3 5\n")
    assert read_sinogram_raw(path, geom).values.tobytes() == s.values.tobytes()
    assert read_sinogram_raw(path).shape == (3, 5)
    with pytest.raises(LengthMismatch):
        read_sinogram_raw(path, ParallelBeamGeometry((0.0,), 15, 1.0))
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(LengthMismatch):
        read_sinogram_raw(path)


def test_pgm_round_trip(tmp_path):
    img = np.random.default_rng(1).uniform(-0.3, 2.0, 30)
    v = Volume(ImageGrid(6, 5, 2.0), img)
    path = tmp_path / "v.pgm"
    write_pgm16(path, v)
    blob = path.read_bytes()
    assert blob.startswith(b"P5\n6 5\n65535\n") and len(blob) == 13 + 2 * 30
    back = read_pgm16(path, pixel_size=2.0)
    assert np.abs(back.values - img).max() <= (img.max() - img.min()) / 65535
    assert back.values.min() == pytest.approx(img.min())
    write_pgm16(path, Volume(ImageGrid(2, 2), np.full(4, 3.0)))
    np.testing.assert_array_equal(read_pgm16(path).values, 3.0)


def test_full_scale_geometry_header_round_trip():
    geom = FanBeamGeometry(uniform_angles(30), 888, 1.0239, 949.075, 541.0)
    back = geometry_from_text(geometry_to_text(geom))
    assert back == geom
    assert (back.num_dets, back.det_size, back.src_to_det) == (888, 1.0239, 949.075)
    par = ParallelBeamGeometry((0.1, 0.2), 4, 0.3)
    assert geometry_from_text(geometry_to_text(par)) == par


def test_manifest(tmp_path):
    (tmp_path / "b.txt").write_text("hello")
    (tmp_path / "sub").mkdir()
    (tmp_path / "sub" / "a.txt").write_text("")
    lines = manifest_lines(tmp_path, [tmp_path / "sub" / "a.txt", tmp_path / "b.txt"])
    assert lines == [
        "b.txt\t5\t2cf24dba5fb0a30e26e83b2ac5b9e29e1b161e5c1fa7425e73043362938b9824",
        "sub/a.txt\t0\te3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855",
    ]
    m = write_manifest(tmp_path, [tmp_path / "b.txt"])
    assert m.read_text().count("\n") == 1
