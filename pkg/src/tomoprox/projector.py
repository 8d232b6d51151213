"""System matrix of a 2D scan: forward/back projection, row access and the
diagonal normalizers used by the iterative solvers.

Entries ``a_ij`` are exact ray/pixel intersection lengths (Siddon tracing),
one ray per detector-cell center. The traced entries are cached as a CSR
matrix per ``(geometry, grid)`` pair; every public operation reads from that
single table, so forward projection, back projection and ``row`` always agree.
Per-ray weighting ``W^(1/2) A`` is applied by scaling rows on the fly.
"""
from __future__ import annotations

import enum
import functools
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp

from .core import (FanBeamGeometry, Geometry, ImageGrid, ParallelBeamGeometry,
                   Sinogram, Volume)
from .errors import (GeometryInvalid, IndexOutOfRange, LengthMismatch,
                     SubsetRequired, WeightLengthMismatch)


class NormalizationKind(str, enum.Enum):
    ROW_SUM = "RowSum"              # r_i = sum_j a_ij
    ROW_SQ_NORM = "RowSqNorm"       # r_i = sum_j a_ij^2
    COL_SUM = "ColSum"              # c_j = sum_i a_ij
    COL_SUM_SUBSET = "ColSumSubset"  # c_j^S = sum_{i in S} a_ij
    COL_NNZ_SUBSET = "ColNnzSubset"  # c_j^S = #{i in S : a_ij != 0}
    SQS_COL_WEIGHT = "SqsColWeight"  # c_j = (A^T A 1)_j


_SUBSET_KINDS = (NormalizationKind.COL_SUM_SUBSET, NormalizationKind.COL_NNZ_SUBSET)


@dataclass(frozen=True)
class RaySample:
    ray_index: int
    indices: np.ndarray
    weights: np.ndarray

    @property
    def entries(self) -> list:
        return list(zip(self.indices.tolist(), self.weights.tolist()))


def _ray_endpoints(geom: Geometry, view: int, grid: ImageGrid):
    theta = geom.angles[view]
    c, s = np.cos(theta), np.sin(theta)
    offsets = (np.arange(geom.num_dets) - (geom.num_dets - 1) / 2.0) * geom.det_size
    u = np.array([-s, c])
    if isinstance(geom, FanBeamGeometry):
        src = geom.src_to_iso * np.array([c, s])
        det_center = -(geom.src_to_det - geom.src_to_iso) * np.array([c, s])
        dst = det_center[None, :] + offsets[:, None] * u[None, :]
        return np.broadcast_to(src, dst.shape).copy(), dst
    if isinstance(geom, ParallelBeamGeometry):
        d = np.array([c, s])
        far = grid.diagonal + 1.0
        base = offsets[:, None] * u[None, :]
        return base - far * d, base + far * d
    raise GeometryInvalid(f"unsupported geometry {type(geom).__name__}")


def trace_rays(src: np.ndarray, dst: np.ndarray, grid: ImageGrid):
    """Siddon traversal of the segments ``src -> dst`` through ``grid``.

    Returns ``(counts, indices, lengths)``: per-ray entry counts and the
    concatenated voxel indices / intersection lengths, in traversal order.
    """
    h = grid.pixel_size
    nx, ny = grid.nx, grid.ny
    xmin, ymin = -nx * h / 2.0, -ny * h / 2.0
    d = dst - src
    length = np.hypot(d[:, 0], d[:, 1])
    xp = xmin + h * np.arange(nx + 1)
    yp = ymin + h * np.arange(ny + 1)

    def axis_params(planes, s0, d0, lo, hi):
        with np.errstate(divide="ignore", invalid="ignore"):
            a = (planes[None, :] - s0[:, None]) / d0[:, None]
        flat = d0 == 0
        inside = (s0 >= lo) & (s0 < hi)
        a_lo = np.where(flat, np.where(inside, -np.inf, np.inf), np.minimum(a[:, 0], a[:, -1]))
        a_hi = np.where(flat, np.where(inside, np.inf, -np.inf), np.maximum(a[:, 0], a[:, -1]))
        return a, a_lo, a_hi

    ax, ax_lo, ax_hi = axis_params(xp, src[:, 0], d[:, 0], xmin, -xmin)
    ay, ay_lo, ay_hi = axis_params(yp, src[:, 1], d[:, 1], ymin, -ymin)
    a_min = np.maximum(0.0, np.maximum(ax_lo, ay_lo))
    a_max = np.minimum(1.0, np.minimum(ax_hi, ay_hi))
    hit = a_max > a_min
    a_min = np.where(hit, a_min, 0.0)
    a_max = np.where(hit, a_max, 0.0)

    cand = np.concatenate([a_min[:, None], ax, ay, a_max[:, None]], axis=1)
    cand = np.where(np.isfinite(cand), cand, a_min[:, None])
    cand = np.clip(cand, a_min[:, None], a_max[:, None])
    cand.sort(axis=1)
    seg = np.diff(cand, axis=1) * length[:, None]
    mid = 0.5 * (cand[:, :-1] + cand[:, 1:])
    px = src[:, 0:1] + mid * d[:, 0:1]
    py = src[:, 1:2] + mid * d[:, 1:2]
    col = np.floor((px - xmin) / h).astype(np.int64)
    row_up = np.floor((py - ymin) / h).astype(np.int64)
    keep = (seg > 1e-9 * h) & (col >= 0) & (col < nx) & (row_up >= 0) & (row_up < ny)
    keep &= hit[:, None]
    vox = (ny - 1 - row_up) * nx + col
    return keep.sum(axis=1), vox[keep], seg[keep]


def build_matrix(geom: Geometry, grid: ImageGrid) -> sp.csr_matrix:
    """Trace every ray of ``geom`` through ``grid`` into a CSR system matrix."""
    counts, indices, data = [], [], []
    for v in range(geom.num_views):
        src, dst = _ray_endpoints(geom, v, grid)
        c, j, a = trace_rays(src, dst, grid)
        counts.append(c)
        indices.append(j)
        data.append(a)
    indptr = np.concatenate([[0], np.cumsum(np.concatenate(counts))])
    return sp.csr_matrix((np.concatenate(data), np.concatenate(indices), indptr),
                         shape=(geom.m, grid.n))


class Projector:
    """Linear operator ``A`` (optionally row-weighted) with view-block access.

    Rows are grouped into ``num_views`` contiguous blocks of ``num_dets`` rays.
    Any CSR/dense matrix can be wrapped directly, which is how the small dense
    oracle systems in the test-suite are expressed.
    """

    def __init__(self, matrix, grid: ImageGrid, num_views: int = 1,
                 geometry: Optional[Geometry] = None, row_scale: Optional[np.ndarray] = None,
                 _blocks=None):
        A = sp.csr_matrix(matrix, dtype=np.float64)
        if A.shape[1] != grid.n:
            raise GeometryInvalid(f"matrix has {A.shape[1]} columns, grid has {grid.n} voxels")
        if num_views < 1 or A.shape[0] % num_views:
            raise GeometryInvalid("row count must split evenly into views")
        self.A = A
        self.grid = grid
        self.geometry = geometry
        self.num_views = num_views
        self.num_dets = A.shape[0] // num_views
        self.row_scale = row_scale
        if _blocks is None:
            _blocks = []
            for v in range(num_views):
                blk = A[v * self.num_dets:(v + 1) * self.num_dets].tocsr()
                _blocks.append((blk, blk.T.tocsr()))
        self._blocks = _blocks
        self._AT = A.T.tocsr()

    @classmethod
    def from_geometry(cls, geom: Geometry, grid: ImageGrid) -> "Projector":
        return cls(build_matrix(geom, grid), grid, geom.num_views, geometry=geom)

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.grid.n

    def weighted(self, weights: Optional[np.ndarray]) -> "Projector":
        """The same operator with row ``i`` scaled by ``sqrt(weights[i])``."""
        if weights is None:
            return self
        w = np.asarray(weights, dtype=np.float64).reshape(-1)
        if w.size != self.m:
            raise WeightLengthMismatch(f"expected {self.m} weights, got {w.size}")
        scale = np.sqrt(w)
        if self.row_scale is not None:
            scale = scale * self.row_scale
        out = Projector.__new__(Projector)
        out.__dict__.update(self.__dict__)
        out.row_scale = scale
        return out

    def view_rows(self, view: int) -> slice:
        return slice(view * self.num_dets, (view + 1) * self.num_dets)

    def subset_rows(self, views: Sequence[int]) -> np.ndarray:
        return np.concatenate([np.arange(self.view_rows(v).start, self.view_rows(v).stop)
                               for v in views])

    # --- projection -----------------------------------------------------
    def forward(self, x: np.ndarray) -> np.ndarray:
        y = self.A @ x
        if self.row_scale is not None:
            y *= self.row_scale
        return y

    def back(self, y: np.ndarray) -> np.ndarray:
        if self.row_scale is not None:
            y = y * self.row_scale
        return self._AT @ y

    def forward_view(self, x: np.ndarray, view: int) -> np.ndarray:
        y = self._blocks[view][0] @ x
        if self.row_scale is not None:
            y *= self.row_scale[self.view_rows(view)]
        return y

    def back_view(self, y: np.ndarray, view: int) -> np.ndarray:
        if self.row_scale is not None:
            y = y * self.row_scale[self.view_rows(view)]
        return self._blocks[view][1] @ y

    def forward_subset(self, x: np.ndarray, views: Sequence[int]) -> np.ndarray:
        return np.concatenate([self.forward_view(x, v) for v in views])

    def back_subset(self, y: np.ndarray, views: Sequence[int]) -> np.ndarray:
        out = np.zeros(self.n)
        k = 0
        for v in views:
            out += self.back_view(y[k:k + self.num_dets], v)
            k += self.num_dets
        return out

    # --- rows -----------------------------------------------------------
    def row(self, i: int) -> RaySample:
        if not 0 <= i < self.m:
            raise IndexOutOfRange(f"ray index {i} outside [0, {self.m})")
        lo, hi = self.A.indptr[i], self.A.indptr[i + 1]
        w = self.A.data[lo:hi].copy()
        if self.row_scale is not None:
            w *= self.row_scale[i]
        return RaySample(int(i), self.A.indices[lo:hi].copy(), w)

    def to_dense(self) -> np.ndarray:
        D = self.A.toarray()
        if self.row_scale is not None:
            D *= self.row_scale[:, None]
        return D

    # --- normalizers ----------------------------------------------------
    def normalization(self, kind: Union[NormalizationKind, str],
                      subset: Optional[Union[int, Iterable[int]]] = None) -> np.ndarray:
        """Diagonal normalizer of the (row-weighted) system.

        ``subset`` is a view index or a collection of view indices and is
        required for the two subset kinds.
        """
        kind = NormalizationKind(kind)
        if kind in _SUBSET_KINDS and subset is None:
            raise SubsetRequired(f"{kind.value} needs a subset of views")
        s = self.row_scale
        ones_m = np.ones(self.m) if s is None else s
        if kind is NormalizationKind.ROW_SUM:
            return self.A @ np.ones(self.n) * ones_m
        if kind is NormalizationKind.ROW_SQ_NORM:
            sq = self.A.multiply(self.A) @ np.ones(self.n)
            return sq if s is None else sq * s * s
        if kind is NormalizationKind.COL_SUM:
            return self._AT @ ones_m
        if kind is NormalizationKind.SQS_COL_WEIGHT:
            return self.back(self.forward(np.ones(self.n)))
        views = [int(subset)] if np.isscalar(subset) else [int(v) for v in subset]
        out = np.zeros(self.n)
        for v in views:
            blkT = self._blocks[v][1]
            if kind is NormalizationKind.COL_SUM_SUBSET:
                out += blkT @ ones_m[self.view_rows(v)]
            else:
                nz = blkT.copy()
                nz.data = (nz.data != 0).astype(np.float64)
                out += nz @ np.ones(self.num_dets)
        return out


@functools.lru_cache(maxsize=16)
def get_projector(geom: Geometry, grid: ImageGrid) -> Projector:
    """Cached projector for a geometry/grid pair."""
    return Projector.from_geometry(geom, grid)


def _check_volume(v: Volume, grid: ImageGrid):
    if v.grid != grid:
        raise GeometryInvalid("volume grid does not match")


def forward_project(geom: Geometry, v: Volume) -> Sinogram:
    return Sinogram(geom, get_projector(geom, v.grid).forward(v.values))


def back_project(geom: Geometry, s: Sinogram, grid: ImageGrid) -> Volume:
    if s.geometry != geom:
        raise GeometryInvalid("sinogram geometry does not match")
    return Volume(grid, get_projector(geom, grid).back(s.values))


def row_entries(geom: Geometry, grid: ImageGrid, i: int) -> RaySample:
    return get_projector(geom, grid).row(i)


def normalization(geom: Geometry, grid: ImageGrid, kind, subset=None,
                  weights: Optional[np.ndarray] = None) -> np.ndarray:
    return get_projector(geom, grid).weighted(weights).normalization(kind, subset)


def as_projector(system, grid: Optional[ImageGrid] = None) -> Projector:
    """Accept a ``Projector`` or a geometry (with ``grid``) and return a projector."""
    if isinstance(system, Projector):
        return system
    if isinstance(system, (FanBeamGeometry, ParallelBeamGeometry)):
        if grid is None:
            raise GeometryInvalid("a grid is required alongside a geometry")
        return get_projector(system, grid)
    raise TypeError(f"cannot build a projector from {type(system).__name__}")


def check_length(vec: np.ndarray, n: int, what: str):
    if vec.shape != (n,):
        raise LengthMismatch(f"{what}: expected length {n}, got {vec.shape}")
