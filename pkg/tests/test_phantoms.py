import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tomoprox import (EllipsePhantomSpec, ImageGrid, Mapping, NoiseModelSpec,
                      ParallelBeamGeometry, Sinogram, poisson_weights, rasterize_phantom,
                      simulate_counts, simulate_measurements)
from tomoprox.errors import AllZeroMeasurements
from tomoprox.phantoms import counts_to_line_integrals


def sino(values):
    v = np.asarray(values, dtype=float)
    return Sinogram(ParallelBeamGeometry((0.0,), v.size, 1.0), v)


def test_parse_and_builtins():
    spec = EllipsePhantomSpec.parse("# comment\n0 0 0.5 0.5 0 1.0\n\n0.1 0 0.2 0.1 30 -0.5  # tail\n")
    assert len(spec.ellipses) == 2 and spec.ellipses[1].theta_deg == 30
    with pytest.raises(ValueError):
        EllipsePhantomSpec.parse("0 0 1 1 0")
    assert len(EllipsePhantomSpec.load("shepp_logan").ellipses) == 10
    assert len(EllipsePhantomSpec.load("torso").ellipses) > 3


def test_load_from_path(tmp_path):
    p = tmp_path / "disc.txt"
    p.write_text("0 0 0.5 0.5 0 2.0\n")
    assert EllipsePhantomSpec.load(p).ellipses[0].intensity == 2.0


def test_disc_rasterization():
    grid = ImageGrid(200, 200, 0.5)
    img = rasterize_phantom(EllipsePhantomSpec.parse("0 0 0.5 0.5 0 1.0"), grid).as_image()
    # radius 0.5 in normalized units = 25 mm; area in pixels of 0.25 mm^2
    assert img.sum() * 0.25 == pytest.approx(np.pi * 25 ** 2, rel=0.01)
    assert set(np.unique(img)) == {0.0, 1.0}


def test_rotated_ellipse_orientation():
    grid = ImageGrid(64, 64)
    wide = rasterize_phantom(EllipsePhantomSpec.parse("0 0 0.8 0.2 0 1"), grid).as_image()
    tall = rasterize_phantom(EllipsePhantomSpec.parse("0 0 0.8 0.2 90 1"), grid).as_image()
    np.testing.assert_array_equal(wide.T, tall)
    up = rasterize_phantom(EllipsePhantomSpec.parse("0 0.5 0.1 0.1 0 1"), grid).as_image()
    assert up[:32].sum() > 0 and up[32:].sum() == 0     # +y is toward row 0


def test_shepp_logan_values():
    img = rasterize_phantom(EllipsePhantomSpec.load("shepp_logan"), ImageGrid(128, 128), 2.0)
    assert img.values.max() == pytest.approx(2.0)
    assert img.values.min() == pytest.approx(0.0, abs=1e-12)   # additive overlaps round
    assert img.as_image()[64, 64] == pytest.approx(0.4)     # 1 - 0.8 inside the skull


def test_counts_deterministic_and_distributed():
    p = sino(np.full(20000, 1.0))
    a = simulate_counts(p, NoiseModelSpec(1000.0, seed=5))
    b = simulate_counts(p, NoiseModelSpec(1000.0, seed=5))
    assert a.values.tobytes() == b.values.tobytes()
    lam = 1000.0 * np.exp(-1.0)
    assert a.values.mean() == pytest.approx(lam, rel=0.01)
    assert a.values.var() == pytest.approx(lam, rel=0.05)
    c = simulate_counts(p, NoiseModelSpec(1000.0, seed=6))
    assert not np.array_equal(a.values, c.values)


def test_noiseless_limit_and_zero_counts():
    p = sino([0.0, 1.0, 2.0])
    m = simulate_measurements(p, NoiseModelSpec(1e12, 0))
    np.testing.assert_allclose(m.values, p.values, atol=1e-5)
    z = counts_to_line_integrals(sino([0.0, 10.0]), 100.0)
    np.testing.assert_allclose(z.values, [np.log(100.0), np.log(10.0)])
    with pytest.warns(RuntimeWarning):
        simulate_counts(sino([-0.1, 0.0]), NoiseModelSpec())
    with pytest.raises(ValueError):
        NoiseModelSpec(i0=0)


def test_poisson_weights():
    w = poisson_weights(sino([0.0, 4.0, 16.0]), Mapping.R2)
    np.testing.assert_allclose(w, [0.25, 0.5, 1.0])
    np.testing.assert_allclose(poisson_weights(sino([2.0, 4.0])), [0.5, 1.0])
    with pytest.raises(AllZeroMeasurements):
        poisson_weights(sino([0.0, 0.0]))


@given(st.lists(st.integers(0, 10**6), min_size=1, max_size=30).filter(lambda v: max(v) > 0),
       st.sampled_from(list(Mapping)))
def test_weights_in_unit_interval_and_monotone(counts, mapping):
    c = np.array(counts, dtype=float)
    w = poisson_weights(sino(c), mapping)
    assert np.all(w > 0) and np.all(w <= 1) and w.max() == 1.0
    order = np.argsort(np.maximum(c, 1), kind="stable")
    assert np.all(np.diff(w[order]) >= 0)
