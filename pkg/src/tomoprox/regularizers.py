"""Sparse difference operators ``K`` and proximal maps of ``g(Kx)``.

Output layout is voxel-major: for voxel ``j`` the ``k`` components of
``(Kx)_j`` are contiguous, i.e. ``Kx`` reshapes to ``(n, k)``.

* ``GRAD_ITV`` / ``GRAD_ATV``: ``k = 2``, (horizontal, vertical) forward
  differences ``x[r, c+1] - x[r, c]`` and ``x[r+1, c] - x[r, c]``.
* ``SAD8``: ``k = 8``, ``x_j - x_nb`` for neighbors E, SE, S, SW, W, NW, N, NE
  (rows grow southwards). Each unordered pair therefore appears twice.

A component whose neighbor falls outside the grid is a structurally zero row.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .core import ImageGrid, Volume
from .errors import GridMismatch, InvalidLambda, LengthMismatch


class RegKind(str, enum.Enum):
    GRAD_ITV = "ITV"
    GRAD_ATV = "ATV"
    SAD8 = "SAD"


# (dr, dc) offsets and sign: component = sign * (x[nb] - x[self]).
_GRAD_STENCIL = (((0, 1), 1.0), ((1, 0), 1.0))
_SAD_STENCIL = tuple((off, -1.0) for off in
                     ((0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1), (-1, 0), (-1, 1)))


@dataclass(frozen=True)
class RegOp:
    kind: RegKind
    grid: ImageGrid
    sigma: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "kind", RegKind(self.kind))
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")

    @property
    def stencil(self):
        return _SAD_STENCIL if self.kind is RegKind.SAD8 else _GRAD_STENCIL

    @property
    def components(self) -> int:
        return len(self.stencil)

    @property
    def d(self) -> int:
        return self.components * self.grid.n


def _ranges(dr: int, dc: int, ny: int, nx: int):
    """Slices of self voxels with an in-grid neighbor at ``(dr, dc)`` and of those neighbors."""
    rs = slice(max(0, -dr), ny - max(0, dr))
    cs = slice(max(0, -dc), nx - max(0, dc))
    rn = slice(rs.start + dr, rs.stop + dr)
    cn = slice(cs.start + dc, cs.stop + dc)
    return (rs, cs), (rn, cn)


def _values(op: RegOp, x) -> np.ndarray:
    if isinstance(x, Volume):
        if x.grid != op.grid:
            raise GridMismatch("volume grid differs from the operator grid")
        return x.values
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (op.grid.n,):
        raise GridMismatch(f"expected {op.grid.n} voxels, got shape {x.shape}")
    return x


def reg_apply(op: RegOp, x) -> np.ndarray:
    """``K x`` as a flat vector of length ``op.d``."""
    ny, nx = op.grid.shape
    img = _values(op, x).reshape(ny, nx)
    out = np.zeros((ny, nx, op.components))
    for k, ((dr, dc), sign) in enumerate(op.stencil):
        me, nb = _ranges(dr, dc, ny, nx)
        out[me + (k,)] = sign * (img[nb] - img[me])
    return out.reshape(-1)


def reg_adjoint(op: RegOp, z) -> Volume:
    """``K^T z`` for ``z`` of length ``op.d``."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (op.d,):
        raise LengthMismatch(f"expected length {op.d}, got shape {z.shape}")
    return Volume(op.grid, reg_adjoint_array(op, z))


def reg_adjoint_array(op: RegOp, z: np.ndarray) -> np.ndarray:
    ny, nx = op.grid.shape
    zz = z.reshape(ny, nx, op.components)
    out = np.zeros((ny, nx))
    for k, ((dr, dc), sign) in enumerate(op.stencil):
        me, nb = _ranges(dr, dc, ny, nx)
        c = sign * zz[me + (k,)]
        out[nb] += c
        out[me] -= c
    return out.reshape(-1)


def prox_reg(op: RegOp, lam: float, v) -> np.ndarray:
    """``prox_{lam g}(v)`` with threshold ``lam * sigma``.

    ITV shrinks each 2-vector toward zero by at most the threshold (block soft
    thresholding); ATV and SAD soft-threshold every component.
    """
    if not lam > 0:
        raise InvalidLambda("lambda must be positive")
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (op.d,):
        raise LengthMismatch(f"expected length {op.d}, got shape {v.shape}")
    thr = lam * op.sigma
    if thr == 0:
        return v.copy()
    if op.kind is RegKind.GRAD_ITV:
        pairs = v.reshape(-1, 2)
        norm = np.hypot(pairs[:, 0], pairs[:, 1])
        return (pairs - thr * pairs / np.maximum(thr, norm)[:, None]).reshape(-1)
    return np.sign(v) * np.maximum(0.0, np.abs(v) - thr)


def power_norm(apply, adjoint, n: int, tol: float = 1e-10, seed: int = 0,
               max_iter: int = 100000) -> float:
    """Largest singular value of a linear map by power iteration on ``A^T A``.

    Stops once two successive Rayleigh quotients agree to relative ``tol``.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    prev = None
    for _ in range(max_iter):
        w = adjoint(apply(v))
        est = float(np.dot(v, w))
        if est <= 0.0:
            return 0.0
        if prev is not None and abs(est - prev) <= tol * est:
            break
        prev = est
        v = w / np.linalg.norm(w)
    return math.sqrt(est)


def op_norm(op: RegOp, tol: float = 1e-10, seed: int = 0, max_iter: int = 100000) -> float:
    """Power-method estimate of ``||K||``."""
    return power_norm(lambda x: reg_apply(op, x), lambda z: reg_adjoint_array(op, z),
                      op.grid.n, tol=tol, seed=seed, max_iter=max_iter)
