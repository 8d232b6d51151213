import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tomoprox import (FanBeamGeometry, ImageGrid, Mapping, Method, ParallelBeamGeometry,
                      ProxConfig, Sinogram, SolveConfig, Volume, clip, default_alpha, snr,
                      uniform_angles)
from tomoprox.errors import (GeometryInvalid, GridMismatch, InvalidLambda, LengthMismatch,
                             ZeroReference)


def test_grid_geometry():
    g = ImageGrid(4, 3, 2.0)
    assert g.n == 12 and g.shape == (3, 4)
    assert g.extent == (8.0, 6.0)
    x, y = g.voxel_centers()
    assert x[0, 0] == -3.0 and y[0, 0] == 2.0      # row 0 is the top row
    assert x[0, -1] == 3.0 and y[-1, 0] == -2.0


def test_volume_is_immutable_copy():
    g = ImageGrid(2, 2)
    src = np.arange(4.0)
    v = Volume(g, src)
    src[0] = 99
    assert v.values[0] == 0
    with pytest.raises(ValueError):
        v.values[0] = 1
    with pytest.raises(LengthMismatch):
        Volume(g, np.zeros(5))
    with pytest.raises(ValueError):
        Volume(g, [0, 1, np.nan, 2])


def test_uniform_angles():
    a = uniform_angles(4)
    np.testing.assert_allclose(a, [0, math.pi / 2, math.pi, 3 * math.pi / 2])
    b = uniform_angles(3, arc=math.pi, endpoint=True)
    assert b[-1] == pytest.approx(math.pi)
    with pytest.raises(GeometryInvalid):
        uniform_angles(0)


def test_geometry_validation():
    with pytest.raises(GeometryInvalid):
        FanBeamGeometry((0.0,), 10, 1.0, 100.0, 150.0)
    with pytest.raises(GeometryInvalid):
        FanBeamGeometry((0.0, 0.0), 10, 1.0, 200.0, 100.0)
    with pytest.raises(GeometryInvalid):
        ParallelBeamGeometry((0.0,), 0, 1.0)
    with pytest.raises(GeometryInvalid):
        ParallelBeamGeometry((), 4, 1.0)
    g = FanBeamGeometry(uniform_angles(5), 7, 1.0, 200.0, 100.0)
    assert g.m == 35 and isinstance(g.angles, tuple)
    assert hash(g) == hash(FanBeamGeometry(uniform_angles(5), 7, 1.0, 200.0, 100.0))


def test_sinogram_shape():
    g = ParallelBeamGeometry((0.0, 1.0, 2.0), 4, 1.0)
    s = Sinogram(g, np.arange(12.0))
    assert s.as_array().shape == (3, 4)
    assert s.as_array()[1, 0] == 4.0    # view-major
    with pytest.raises(LengthMismatch):
        Sinogram(g, np.zeros(11))


def test_snr_examples():
    g = ImageGrid(2, 1)
    ref = Volume(g, [1.0, 1.0])
    assert snr(ref, ref) == math.inf
    assert snr(Volume(g, [1.1, 0.9]), ref) == pytest.approx(20.0)
    with pytest.raises(ZeroReference):
        snr(ref, Volume.zeros(g))
    with pytest.raises(GridMismatch):
        snr(Volume.zeros(ImageGrid(1, 2)), ref)


@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=20), st.floats(0.01, 100))
def test_snr_scale_invariance(vals, k):
    g = ImageGrid(len(vals), 1)
    ref = Volume(g, np.linspace(1, 2, len(vals)))
    est = Volume(g, vals)
    if np.array_equal(est.values, ref.values):
        return
    a = snr(est, ref)
    b = snr(Volume(g, k * est.values), Volume(g, k * ref.values))
    assert a == pytest.approx(b, rel=1e-9, abs=1e-9)


def test_clip_and_mapping():
    g = ImageGrid(3, 1)
    assert clip(Volume(g, [-1.0, 0.0, 2.0])).values.tolist() == [0.0, 0.0, 2.0]
    w = np.array([0.25, 1.0])
    np.testing.assert_allclose(Mapping.R2.apply(w), [0.5, 1.0])
    np.testing.assert_allclose(Mapping.R3.apply(np.array([0.125])), [0.5])


def test_solve_config():
    cfg = SolveConfig("SART", 1.5, 10)
    assert cfg.method is Method.SART
    with pytest.raises(ValueError):
        SolveConfig("SART", 0.0)
    with pytest.raises(ValueError):
        SolveConfig("SART", 1.0, -1)
    with pytest.warns(RuntimeWarning):
        SolveConfig("SIRT", 2.5)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        SolveConfig("SART", 2.5)     # no proven range, no warning
    assert default_alpha(15) == 1.99 and default_alpha(90) == 1.0


def test_prox_config():
    with pytest.raises(InvalidLambda):
        ProxConfig(lam=0.0)
    with pytest.raises(ValueError):
        ProxConfig(method="SIRT")
    with pytest.raises(ValueError):
        ProxConfig(weights=[0.5, 0.0])
    cfg = ProxConfig(weights=[0.25, 1.0], mapping="R2")
    np.testing.assert_allclose(cfg.effective_weights(), [0.5, 1.0])
