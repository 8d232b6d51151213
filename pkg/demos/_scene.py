"""Shared desk-scale scene used by the demo scripts."""
from tomoprox import (EllipsePhantomSpec, FanBeamGeometry, ImageGrid, NoiseModelSpec,
                      forward_project, get_projector, rasterize_phantom, simulate_counts,
                      uniform_angles)
from tomoprox.phantoms import counts_to_line_integrals

I0 = 1e5


def desk_scene(num_views, n=128, seed=0):
    """Shepp-Logan on an ``n x n`` 4 mm grid, fan beam, Poisson noise at ``I0``.

    Returns ``(truth, projector, line_integrals, counts)``.
    """
    grid = ImageGrid(n, n, 4.0 * 128 / n)
    truth = rasterize_phantom(EllipsePhantomSpec.load("shepp_logan"), grid, 0.02)
    geom = FanBeamGeometry(uniform_angles(num_views), 222, 4 * 1.0239, 949.075, 541.0)
    counts = simulate_counts(forward_project(geom, truth), NoiseModelSpec(I0, seed))
    return truth, get_projector(geom, grid), counts_to_line_integrals(counts, I0), counts
