"""Domain types shared by every module: grids, volumes, geometries, sinograms
and solver configuration.

Conventions fixed here and relied on everywhere else:

* voxels are stored row-major, ``j = row * nx + col``; row 0 is the top of
  the image (largest world ``y``), column 0 the left edge (smallest ``x``);
* rays are stored view-major, ``i = view * num_dets + det``;
* all arrays are float64.
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, replace
from typing import Optional, Union

import numpy as np

from .errors import GeometryInvalid, GridMismatch, InvalidLambda, LengthMismatch, ZeroReference


def _frozen_array(values, length: int, what: str) -> np.ndarray:
    arr = np.array(values, dtype=np.float64).reshape(-1)
    if arr.size != length:
        raise LengthMismatch(f"{what}: expected {length} values, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{what}: values must be finite")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ImageGrid:
    """Square-pixel 2D grid centered on the world origin (lengths in mm)."""

    nx: int
    ny: int
    pixel_size: float = 1.0

    def __post_init__(self):
        if int(self.nx) < 1 or int(self.ny) < 1:
            raise GeometryInvalid("grid needs nx >= 1 and ny >= 1")
        if not self.pixel_size > 0:
            raise GeometryInvalid("pixel_size must be positive")
        object.__setattr__(self, "nx", int(self.nx))
        object.__setattr__(self, "ny", int(self.ny))
        object.__setattr__(self, "pixel_size", float(self.pixel_size))

    @property
    def n(self) -> int:
        return self.nx * self.ny

    @property
    def shape(self) -> tuple:
        return (self.ny, self.nx)

    @property
    def extent(self) -> tuple:
        """World size ``(width, height)`` in mm."""
        return (self.nx * self.pixel_size, self.ny * self.pixel_size)

    @property
    def diagonal(self) -> float:
        w, h = self.extent
        return math.hypot(w, h)

    def voxel_centers(self):
        """World coordinates ``(x, y)`` of every voxel center, each of shape ``(ny, nx)``."""
        h = self.pixel_size
        xs = (np.arange(self.nx) - (self.nx - 1) / 2.0) * h
        ys = ((self.ny - 1) / 2.0 - np.arange(self.ny)) * h
        return np.meshgrid(xs, ys)


@dataclass(frozen=True, eq=False)
class Volume:
    grid: ImageGrid
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen_array(self.values, self.grid.n, "Volume"))

    @classmethod
    def zeros(cls, grid: ImageGrid) -> "Volume":
        return cls(grid, np.zeros(grid.n))

    def as_image(self) -> np.ndarray:
        return self.values.reshape(self.grid.shape)

    def with_values(self, values) -> "Volume":
        return Volume(self.grid, values)


def uniform_angles(num_views: int, arc: float = 2 * math.pi, start: float = 0.0,
                   endpoint: bool = False) -> np.ndarray:
    """Equally spaced view angles (radians) over ``arc`` starting at ``start``."""
    if num_views < 1:
        raise GeometryInvalid("num_views must be >= 1")
    return start + np.linspace(0.0, arc, num_views, endpoint=endpoint)


def _check_angles(angles) -> tuple:
    a = tuple(float(t) for t in np.asarray(angles, dtype=np.float64).reshape(-1))
    if len(a) < 1:
        raise GeometryInvalid("need at least one view angle")
    if not all(math.isfinite(t) for t in a):
        raise GeometryInvalid("angles must be finite")
    if any(b <= c for c, b in zip(a, a[1:])):
        raise GeometryInvalid("angles must be strictly increasing")
    return a


@dataclass(frozen=True)
class FanBeamGeometry:
    """Flat-detector fan beam.

    At angle ``theta`` the source sits at ``src_to_iso * (cos, sin)`` and the
    detector center on the opposite side of the isocenter, with the detector
    row running along ``(-sin, cos)``. One ray per detector-cell center.
    """

    angles: tuple
    num_dets: int
    det_size: float
    src_to_det: float
    src_to_iso: float

    def __post_init__(self):
        object.__setattr__(self, "angles", _check_angles(self.angles))
        if int(self.num_dets) < 1:
            raise GeometryInvalid("num_dets must be >= 1")
        if not self.det_size > 0:
            raise GeometryInvalid("det_size must be positive")
        if not 0 < self.src_to_iso < self.src_to_det:
            raise GeometryInvalid("need 0 < src_to_iso < src_to_det")
        object.__setattr__(self, "num_dets", int(self.num_dets))
        for name in ("det_size", "src_to_det", "src_to_iso"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @property
    def num_views(self) -> int:
        return len(self.angles)

    @property
    def m(self) -> int:
        return self.num_views * self.num_dets

    def with_angles(self, angles) -> "FanBeamGeometry":
        return replace(self, angles=tuple(np.asarray(angles, dtype=float)))


@dataclass(frozen=True)
class ParallelBeamGeometry:
    """Parallel beam; at angle ``theta`` rays travel along ``(cos, sin)`` and the
    detector row runs along ``(-sin, cos)`` through the isocenter."""

    angles: tuple
    num_dets: int
    det_size: float

    def __post_init__(self):
        object.__setattr__(self, "angles", _check_angles(self.angles))
        if int(self.num_dets) < 1:
            raise GeometryInvalid("num_dets must be >= 1")
        if not self.det_size > 0:
            raise GeometryInvalid("det_size must be positive")
        object.__setattr__(self, "num_dets", int(self.num_dets))
        object.__setattr__(self, "det_size", float(self.det_size))

    @property
    def num_views(self) -> int:
        return len(self.angles)

    @property
    def m(self) -> int:
        return self.num_views * self.num_dets

    def with_angles(self, angles) -> "ParallelBeamGeometry":
        return replace(self, angles=tuple(np.asarray(angles, dtype=float)))


Geometry = Union[FanBeamGeometry, ParallelBeamGeometry]


@dataclass(frozen=True, eq=False)
class Sinogram:
    geometry: Geometry
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen_array(self.values, self.geometry.m, "Sinogram"))

    def as_array(self) -> np.ndarray:
        """Values shaped ``(num_views, num_dets)``."""
        return self.values.reshape(self.geometry.num_views, self.geometry.num_dets)

    def with_values(self, values) -> "Sinogram":
        return Sinogram(self.geometry, values)


class Method(str, enum.Enum):
    ART = "ART"
    SART = "SART"
    SIRT = "SIRT"
    BSSART = "BSSART"
    BICAV = "BICAV"
    OSSQS = "OSSQS"
    CGLS = "CGLS"


class Mapping(str, enum.Enum):
    """Monotone remaps of normalized Poisson weights."""

    R1 = "R1"
    R2 = "R2"
    R3 = "R3"

    def apply(self, w: np.ndarray) -> np.ndarray:
        if self is Mapping.R1:
            return np.asarray(w, dtype=np.float64)
        if self is Mapping.R2:
            return np.sqrt(w)
        return np.cbrt(w)


# Methods whose convergence guarantee needs 0 < alpha < 2.
_PROVEN_ALPHA_RANGE = {Method.ART, Method.SIRT, Method.BSSART, Method.BICAV}

PROX_METHODS = (Method.ART, Method.SART, Method.BICAV, Method.OSSQS)


def default_alpha(num_views: int) -> float:
    """Relaxation default: aggressive for sparse views, 1 otherwise."""
    return 1.99 if num_views <= 30 else 1.0


@dataclass(frozen=True)
class SolveConfig:
    method: Method
    alpha: float = 1.0
    outer_iters: int = 30
    num_subsets: Optional[int] = None
    clip_enabled: bool = True
    seed: int = 0
    ordering: str = "sequential"

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.outer_iters < 0:
            raise ValueError("outer_iters must be >= 0")
        if self.num_subsets is not None and self.num_subsets < 1:
            raise ValueError("num_subsets must be >= 1")
        if self.ordering not in ("sequential", "bitrev"):
            raise ValueError("ordering must be 'sequential' or 'bitrev'")
        if self.alpha >= 2 and self.method in _PROVEN_ALPHA_RANGE:
            warnings.warn(f"alpha={self.alpha} is outside (0, 2) where {self.method.value} "
                          "is known to converge", RuntimeWarning, stacklevel=3)


@dataclass(frozen=True, eq=False)
class ProxConfig:
    """Parameters of one data-term proximal call.

    ``weights`` are normalized per-ray weights in (0, 1]; ``mapping`` is applied
    to them before use, so pass already-mapped weights with ``Mapping.R1``.
    """

    method: Method = Method.SART
    alpha: float = 1.0
    lam: float = 1.0
    inner_iters: int = 2
    weights: Optional[np.ndarray] = None
    mapping: Mapping = Mapping.R1
    num_subsets: Optional[int] = None
    clip_enabled: bool = True
    warm_start: bool = False

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        object.__setattr__(self, "mapping", Mapping(self.mapping))
        if self.method not in PROX_METHODS:
            raise ValueError(f"no proximal operator for {self.method.value}")
        if not self.lam > 0:
            raise InvalidLambda("lambda must be positive")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.inner_iters < 1:
            raise ValueError("inner_iters must be >= 1")
        if self.weights is not None:
            w = np.array(self.weights, dtype=np.float64).reshape(-1)
            if not np.all((w > 0) & (w <= 1)):
                raise ValueError("weights must lie in (0, 1]")
            w.setflags(write=False)
            object.__setattr__(self, "weights", w)

    def effective_weights(self) -> Optional[np.ndarray]:
        if self.weights is None:
            return None
        return self.mapping.apply(self.weights)


def clip(v: Volume) -> Volume:
    """Projection onto the nonnegative orthant."""
    return v.with_values(np.maximum(v.values, 0.0))


def snr(x: Volume, xhat: Volume) -> float:
    """SNR in dB of estimate ``x`` against reference ``xhat``; ``inf`` on a perfect match."""
    if x.grid != xhat.grid:
        raise GridMismatch("estimate and reference live on different grids")
    return snr_values(x.values, xhat.values)


def snr_values(x: np.ndarray, xhat: np.ndarray) -> float:
    signal = float(np.dot(xhat, xhat))
    if signal == 0.0:
        raise ZeroReference("reference volume is identically zero")
    err = x - xhat
    noise = float(np.dot(err, err))
    if noise == 0.0:
        return math.inf
    return 10.0 * math.log10(signal / noise)
