"""Ellipse phantoms, noiseless sinograms and the transmission noise model."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Union

import numpy as np

from .core import ImageGrid, Mapping, Sinogram, Volume
from .errors import AllZeroMeasurements

BUILTIN_PHANTOMS = {
    "shepp_logan": "shepp_logan_modified.txt",
    "torso": "torso_standin.txt",
}


@dataclass(frozen=True)
class Ellipse:
    cx: float
    cy: float
    a: float
    b: float
    theta_deg: float
    intensity: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValueError("ellipse semi-axes must be positive")


@dataclass(frozen=True)
class EllipsePhantomSpec:
    ellipses: tuple = ()

    @classmethod
    def parse(cls, text: str) -> "EllipsePhantomSpec":
        """Parse ``cx cy a b theta_deg intensity`` lines; ``#`` starts a comment."""
        out = []
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            fields = line.split()
            if len(fields) != 6:
                raise ValueError(f"line {lineno}: expected 6 fields, got {len(fields)}")
            out.append(Ellipse(*map(float, fields)))
        return cls(tuple(out))

    @classmethod
    def load(cls, source: Union[str, Path]) -> "EllipsePhantomSpec":
        """Load a builtin phantom by name or a phantom file by path."""
        name = str(source)
        if name in BUILTIN_PHANTOMS:
            text = resources.files("tomoprox").joinpath("data", BUILTIN_PHANTOMS[name]).read_text()
        else:
            text = Path(source).read_text()
        return cls.parse(text)


def rasterize_phantom(spec: EllipsePhantomSpec, grid: ImageGrid, scale: float = 1.0) -> Volume:
    """Sum of ellipse intensities at every voxel center, times ``scale``.

    Ellipse coordinates are normalized so that [-1, 1] spans the grid width
    and height.
    """
    x, y = grid.voxel_centers()
    w, h = grid.extent
    xn, yn = x / (w / 2.0), y / (h / 2.0)
    img = np.zeros(grid.shape)
    for e in spec.ellipses:
        t = math.radians(e.theta_deg)
        dx, dy = xn - e.cx, yn - e.cy
        xr = dx * math.cos(t) + dy * math.sin(t)
        yr = -dx * math.sin(t) + dy * math.cos(t)
        img[(xr / e.a) ** 2 + (yr / e.b) ** 2 <= 1.0] += e.intensity
    return Volume(grid, scale * img.reshape(-1))


@dataclass(frozen=True)
class NoiseModelSpec:
    i0: float = 1e5
    seed: int = 0

    def __post_init__(self):
        if not self.i0 > 0:
            raise ValueError("i0 must be positive")


def simulate_counts(p: Sinogram, noise: NoiseModelSpec) -> Sinogram:
    """Transmitted photon counts ``I_t ~ Poisson(I0 exp(-p))``, one draw per ray.

    Draws come from numpy's Poisson sampler (multiplication method below mean
    10, transformed rejection above) on a PCG64 stream seeded by
    ``noise.seed``, taken in ray order.
    """
    if np.any(p.values < 0):
        warnings.warn("negative line integrals in noiseless sinogram", RuntimeWarning, stacklevel=2)
    rng = np.random.Generator(np.random.PCG64(noise.seed))
    lam = noise.i0 * np.exp(-p.values)
    return p.with_values(rng.poisson(lam).astype(np.float64))


def counts_to_line_integrals(counts: Sinogram, i0: float) -> Sinogram:
    """``-ln(I_t / I0)``; zero-count rays are treated as one photon."""
    it = np.where(counts.values == 0, 1.0, counts.values)
    return counts.with_values(-np.log(it / i0))


def simulate_measurements(p: Sinogram, noise: NoiseModelSpec) -> Sinogram:
    """Noisy line integrals for a noiseless sinogram under the Poisson model."""
    return counts_to_line_integrals(simulate_counts(p, noise), noise.i0)


def poisson_weights(raw: Sinogram, mapping: Union[Mapping, str] = Mapping.R1) -> np.ndarray:
    """Per-ray WLS weights from measured intensities.

    Zero counts are clamped to one photon, counts are divided by their
    maximum, and the ratios go through the monotone ``mapping``.
    """
    it = np.asarray(raw.values, dtype=np.float64)
    if np.any(it < 0):
        raise ValueError("measured intensities must be nonnegative")
    if not np.any(it > 0):
        raise AllZeroMeasurements("all measured intensities are zero")
    it = np.where(it == 0, 1.0, it)
    return Mapping(mapping).apply(it / it.max())
