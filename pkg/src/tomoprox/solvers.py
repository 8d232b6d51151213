"""Row-action and simultaneous iterative solvers for ``Ax = p``.

Every method follows the same outer loop: for ``t = 1..T`` sweep over the
method's subsets in a fixed order, apply the update, clip. Subset granularity:

=========  ===========================  =====================================
method     subset                       normalizers
=========  ===========================  =====================================
ART        one ray (int ray index)      RowSqNorm
SIRT       all rays (``None``)          RowSum, ColSum
SART       one view (int view index)    RowSum, ColSumSubset
BSSART     one view                     RowSum, ColSum
BICAV      one view                     RowSqNorm, ColNnzSubset
OSSQS      group of views (tuple)       SqsColWeight
CGLS       all rays (``None``)          none
=========  ===========================  =====================================

Voxels (or rays) whose normalizer is exactly zero are never updated.
"""
from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Union

import numpy as np

from .core import (ImageGrid, Method, Sinogram, SolveConfig, Volume,
                   snr_values)
from .errors import SubsetGranularityMismatch
from .projector import NormalizationKind as NK
from .projector import Projector, as_projector, check_length

Subset = Union[None, int, Sequence[int]]


def safe_inverse(v: np.ndarray) -> np.ndarray:
    """Elementwise ``1/v`` with zeros mapped to zero."""
    out = np.zeros_like(v, dtype=np.float64)
    nz = v != 0
    out[nz] = 1.0 / v[nz]
    return out


def bit_reversal_order(k: int) -> List[int]:
    """Permutation of ``range(k)`` sorted by bit-reversed index."""
    bits = max(1, (k - 1).bit_length())
    return sorted(range(k), key=lambda i: int(format(i, f"0{bits}b")[::-1], 2))


def view_groups(num_views: int, num_subsets: int) -> List[tuple]:
    """Interleaved view groups ``(k, k+s, k+2s, ...)`` for ordered subsets."""
    s = min(num_subsets, num_views)
    return [tuple(range(k, num_views, s)) for k in range(s)]


def make_subsets(method: Method, proj: Projector, num_subsets: Optional[int] = None,
                 ordering: str = "sequential") -> list:
    """Subsets visited during one outer iteration, in visiting order."""
    method = Method(method)
    views = list(range(proj.num_views))
    if ordering == "bitrev":
        views = [views[i] for i in bit_reversal_order(len(views))]
    if method is Method.ART:
        return [i for v in views for i in range(v * proj.num_dets, (v + 1) * proj.num_dets)]
    if method in (Method.SART, Method.BSSART, Method.BICAV):
        return views
    if method is Method.OSSQS:
        groups = view_groups(proj.num_views, num_subsets or proj.num_views)
        if ordering == "bitrev":
            groups = [groups[i] for i in bit_reversal_order(len(groups))]
        return groups
    return [None]


@dataclass
class Norms:
    """Inverted diagonal normalizers for one method (zeros where undefined)."""

    method: Method
    rinv: Optional[np.ndarray] = None
    cinv: Optional[np.ndarray] = None
    cinv_views: Optional[List[np.ndarray]] = None
    num_subsets: int = 1


def compute_norms(method: Method, proj: Projector, num_subsets: Optional[int] = None) -> Norms:
    method = Method(method)
    nrm = Norms(method)
    if method in (Method.ART, Method.BICAV):
        nrm.rinv = safe_inverse(proj.normalization(NK.ROW_SQ_NORM))
    elif method in (Method.SIRT, Method.SART, Method.BSSART):
        nrm.rinv = safe_inverse(proj.normalization(NK.ROW_SUM))
    if method in (Method.SIRT, Method.BSSART):
        nrm.cinv = safe_inverse(proj.normalization(NK.COL_SUM))
    elif method is Method.SART:
        nrm.cinv_views = [safe_inverse(proj.normalization(NK.COL_SUM_SUBSET, v))
                          for v in range(proj.num_views)]
    elif method is Method.BICAV:
        nrm.cinv_views = [safe_inverse(proj.normalization(NK.COL_NNZ_SUBSET, v))
                          for v in range(proj.num_views)]
    elif method is Method.OSSQS:
        nrm.cinv = safe_inverse(proj.normalization(NK.SQS_COL_WEIGHT))
        nrm.num_subsets = len(view_groups(proj.num_views, num_subsets or proj.num_views))
    return nrm


@dataclass
class TraceRow:
    iter: int
    snr_db: float
    residual_l2: float
    wall_ms: float


@dataclass
class SolverState:
    x: Volume
    t: int = 0
    cg_aux: Optional[dict] = None
    trace: List[TraceRow] = field(default_factory=list)


def _check_subset(method: Method, subset: Subset, proj: Projector):
    if method is Method.ART:
        ok = isinstance(subset, (int, np.integer)) and 0 <= subset < proj.m
    elif method in (Method.SART, Method.BSSART, Method.BICAV):
        ok = isinstance(subset, (int, np.integer)) and 0 <= subset < proj.num_views
    elif method is Method.OSSQS:
        ok = (isinstance(subset, (int, np.integer)) and 0 <= subset < proj.num_views) or (
            isinstance(subset, (tuple, list)) and len(subset) > 0
            and all(0 <= int(v) < proj.num_views for v in subset))
    else:
        ok = subset is None
    if not ok:
        raise SubsetGranularityMismatch(f"{method.value} cannot update on subset {subset!r}")


def cgls_init(proj: Projector, p: np.ndarray, x: np.ndarray) -> dict:
    r = p - proj.forward(x)
    s = proj.back(r)
    return {"x": x.copy(), "r": r, "d": s.copy(), "gamma": float(np.dot(s, s))}


def _update(method: Method, x: np.ndarray, proj: Projector, p: np.ndarray, subset: Subset,
            alpha: float, norms: Norms, clip: bool, aux: Optional[dict]) -> None:
    """Apply one subset update to ``x`` in place."""
    if method is Method.ART:
        i = int(subset)
        lo, hi = proj.A.indptr[i], proj.A.indptr[i + 1]
        idx, a = proj.A.indices[lo:hi], proj.A.data[lo:hi]
        if proj.row_scale is not None:
            a = a * proj.row_scale[i]
        res = p[i] - np.dot(a, x[idx])
        x[idx] += (alpha * norms.rinv[i] * res) * a
        if clip:
            x[idx] = np.maximum(x[idx], 0.0)
        return
    if method is Method.CGLS:
        q = proj.forward(aux["d"])
        delta = float(np.dot(q, q))
        if delta > 0 and aux["gamma"] > 0:
            step = aux["gamma"] / delta
            aux["x"] += step * aux["d"]
            aux["r"] -= step * q
            s = proj.back(aux["r"])
            gamma = float(np.dot(s, s))
            aux["d"] = s + (gamma / aux["gamma"]) * aux["d"]
            aux["gamma"] = gamma
        x[:] = np.maximum(aux["x"], 0.0) if clip else aux["x"]
        return
    if method is Method.SIRT:
        x += alpha * norms.cinv * proj.back(norms.rinv * (p - proj.forward(x)))
    elif method is Method.OSSQS:
        views = (int(subset),) if isinstance(subset, (int, np.integer)) else tuple(subset)
        rows = proj.subset_rows(views)
        res = p[rows] - proj.forward_subset(x, views)
        x += (alpha * norms.num_subsets) * norms.cinv * proj.back_subset(res, views)
    else:
        v = int(subset)
        rows = proj.view_rows(v)
        res = norms.rinv[rows] * (p[rows] - proj.forward_view(x, v))
        cinv = norms.cinv if method is Method.BSSART else norms.cinv_views[v]
        x += alpha * cinv * proj.back_view(res, v)
    if clip:
        np.maximum(x, 0.0, out=x)


def solver_step(method, state: SolverState, system, p, subset: Subset, alpha: float,
                norms: Norms, clip: bool = True) -> SolverState:
    """One subset update of ``method``; returns a new state.

    ``system`` is a :class:`Projector` or a geometry (its grid is taken from
    ``state.x``).
    """
    method = Method(method)
    proj = as_projector(system, state.x.grid)
    pv = p.values if isinstance(p, Sinogram) else np.asarray(p, dtype=np.float64)
    check_length(pv, proj.m, "sinogram")
    _check_subset(method, subset, proj)
    x = state.x.values.copy()
    aux = None
    if method is Method.CGLS:
        aux = state.cg_aux or cgls_init(proj, pv, x)
        aux = {k: (v.copy() if isinstance(v, np.ndarray) else v) for k, v in aux.items()}
    _update(method, x, proj, pv, subset, alpha, norms, clip, aux)
    return SolverState(Volume(state.x.grid, x), state.t, aux, list(state.trace))


def run_solver(cfg: SolveConfig, system, p, ground_truth: Optional[Volume] = None,
               grid: Optional[ImageGrid] = None,
               callback: Optional[Callable[[int, np.ndarray], None]] = None) -> SolverState:
    """Run ``cfg.outer_iters`` full sweeps from ``x = 0``.

    ``callback(t, x)`` is called after each outer iteration with the reported
    iterate. The trace holds one row per outer iteration; ``snr_db`` is NaN
    without a ground truth and ``wall_ms`` is cumulative.
    """
    if grid is None and ground_truth is not None:
        grid = ground_truth.grid
    proj = as_projector(system, grid)
    grid = proj.grid
    pv = p.values if isinstance(p, Sinogram) else np.asarray(p, dtype=np.float64)
    check_length(pv, proj.m, "sinogram")
    method = cfg.method
    norms = compute_norms(method, proj, cfg.num_subsets)
    subsets = make_subsets(method, proj, cfg.num_subsets, cfg.ordering)

    x = np.zeros(grid.n)
    aux = cgls_init(proj, pv, x) if method is Method.CGLS else None
    # Projection inside the loop would break conjugacy, so CGLS clips only what it reports.
    clip_inner = cfg.clip_enabled and method is not Method.CGLS
    trace: List[TraceRow] = []
    t0 = time.perf_counter()
    for t in range(1, cfg.outer_iters + 1):
        for S in subsets:
            _update(method, x, proj, pv, S, cfg.alpha, norms, clip_inner, aux)
        if method is Method.CGLS and cfg.clip_enabled:
            x = np.maximum(aux["x"], 0.0)
        elapsed = (time.perf_counter() - t0) * 1e3
        if not np.all(np.isfinite(x)):
            raise FloatingPointError(f"{method.value} diverged at iteration {t}")
        snr_db = snr_values(x, ground_truth.values) if ground_truth is not None else float("nan")
        res = float(np.linalg.norm(proj.forward(x) - pv))
        trace.append(TraceRow(t, snr_db, res, elapsed))
        if callback is not None:
            callback(t, x)
    return SolverState(Volume(grid, x), cfg.outer_iters, aux, trace)


def write_trace_csv(path, trace: Sequence[TraceRow], timing: bool = True) -> None:
    """CSV ``iter,snr_db,residual_l2,wall_ms``; ``wall_ms`` is ``nan`` unless ``timing``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iter", "snr_db", "residual_l2", "wall_ms"])
        for row in trace:
            w.writerow([row.iter, repr(row.snr_db), repr(row.residual_l2),
                        repr(row.wall_ms) if timing else "nan"])
