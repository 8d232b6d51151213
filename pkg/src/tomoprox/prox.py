"""Proximal operators of the least-squares tomography data term.

``prox_ls`` approximately solves

    argmin_x ||A x - p||_W^2 + (1 / (2 lam)) ||x - u||^2

by running an ART-family solver on a lifted system. For ART, SART and BICAV
the lifted unknowns are ``y = sqrt(2 lam) (p - A x)`` and ``z = x - u``; the
lifted system is consistent and its minimum-norm solution is the prox point.
``z`` is eliminated, so the recursions act on ``x`` (started at ``u``) and
``y`` (started at 0). OS-SQS instead runs on the stacked least-squares system
``[sqrt(2 lam) A; I] x = [sqrt(2 lam) p; u]`` from ``x = 0``.

Weighted data terms (``W = diag(w)``) reuse the same code with every row of
``A`` and ``p`` scaled by ``sqrt(w_i)`` on the fly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .core import ImageGrid, Method, ProxConfig, Sinogram, Volume
from .errors import InvalidLambda, SubsetGranularityMismatch
from .projector import NormalizationKind as NK
from .projector import Projector, as_projector, check_length
from .solvers import Subset, make_subsets, safe_inverse, view_groups


@dataclass
class ProxNorms:
    """Lifted-system normalizers for one ``(method, lam, weights)`` triple."""

    method: Method
    lam: float
    row_denom: Optional[np.ndarray] = None      # ART/BICAV: 2 lam r_i + 1, SART: sqrt(2 lam) r_i + 1
    col_inv_views: Optional[List[np.ndarray]] = None
    sqs_scale: Optional[np.ndarray] = None      # OS-SQS: s / (2 lam c_j + 1)
    num_subsets: int = 1


def prox_norms(method, proj: Projector, lam: float, num_subsets: Optional[int] = None) -> ProxNorms:
    """Normalizers of the lifted system built on ``proj`` (already row-weighted)."""
    method = Method(method)
    if not lam > 0:
        raise InvalidLambda("lambda must be positive")
    q = math.sqrt(2.0 * lam)
    nrm = ProxNorms(method, lam)
    if method is Method.SART:
        nrm.row_denom = q * proj.normalization(NK.ROW_SUM) + 1.0
        nrm.col_inv_views = [safe_inverse(q * proj.normalization(NK.COL_SUM_SUBSET, v))
                             for v in range(proj.num_views)]
    elif method in (Method.ART, Method.BICAV):
        nrm.row_denom = 2.0 * lam * proj.normalization(NK.ROW_SQ_NORM) + 1.0
        if method is Method.BICAV:
            nrm.col_inv_views = [safe_inverse(proj.normalization(NK.COL_NNZ_SUBSET, v))
                                 for v in range(proj.num_views)]
    elif method is Method.OSSQS:
        s = len(view_groups(proj.num_views, num_subsets or proj.num_views))
        nrm.num_subsets = s
        nrm.sqs_scale = s / (2.0 * lam * proj.normalization(NK.SQS_COL_WEIGHT) + 1.0)
    else:
        raise ValueError(f"no proximal operator for {method.value}")
    return nrm


@dataclass
class ProxState:
    x: Volume
    y: Optional[np.ndarray]
    u: Volume


def _prox_update(method: Method, x: np.ndarray, y: Optional[np.ndarray], u: np.ndarray,
                 proj: Projector, p: np.ndarray, subset: Subset, alpha: float,
                 nrm: ProxNorms, clip: bool) -> None:
    """One subset update of ``(x, y)`` in place; ``p`` is already row-weighted."""
    q = math.sqrt(2.0 * nrm.lam)
    if method is Method.ART:
        i = int(subset)
        lo, hi = proj.A.indptr[i], proj.A.indptr[i + 1]
        idx, a = proj.A.indices[lo:hi], proj.A.data[lo:hi]
        if proj.row_scale is not None:
            a = a * proj.row_scale[i]
        t = (q * p[i] - q * np.dot(a, x[idx]) - y[i]) / nrm.row_denom[i]
        y[i] += alpha * t
        x[idx] += (alpha * t * q) * a
        if clip:
            x[idx] = np.maximum(x[idx], 0.0)
        return
    if method is Method.OSSQS:
        views = (int(subset),) if isinstance(subset, (int, np.integer)) else tuple(subset)
        rows = proj.subset_rows(views)
        grad = proj.back_subset(p[rows] - proj.forward_subset(x, views), views)
        x += alpha * nrm.sqs_scale * (2.0 * nrm.lam * grad + u - x)
    else:
        v = int(subset)
        rows = proj.view_rows(v)
        t = (q * p[rows] - q * proj.forward_view(x, v) - y[rows]) / nrm.row_denom[rows]
        y[rows] += alpha * t
        x += alpha * (q * proj.back_view(t, v)) * nrm.col_inv_views[v]
    if clip:
        np.maximum(x, 0.0, out=x)


def _check_prox_subset(method: Method, subset: Subset, proj: Projector):
    if method is Method.ART:
        ok = isinstance(subset, (int, np.integer)) and 0 <= subset < proj.m
    elif method in (Method.SART, Method.BICAV):
        ok = isinstance(subset, (int, np.integer)) and 0 <= subset < proj.num_views
    else:
        ok = (isinstance(subset, (int, np.integer)) and 0 <= subset < proj.num_views) or (
            isinstance(subset, (tuple, list)) and len(subset) > 0
            and all(0 <= int(v) < proj.num_views for v in subset))
    if not ok:
        raise SubsetGranularityMismatch(f"{method.value} prox cannot update on subset {subset!r}")


def prox_inner_step(method, state: ProxState, system, p, subset: Subset, alpha: float,
                    lam: float, norms: Optional[ProxNorms] = None, clip: bool = False) -> ProxState:
    """Apply exactly one subset update of the ``method`` prox recursion.

    ``system`` must already carry any row weighting and ``p`` must be the
    matching (weighted) sinogram.
    """
    method = Method(method)
    proj = as_projector(system, state.x.grid)
    pv = p.values if isinstance(p, Sinogram) else np.asarray(p, dtype=np.float64)
    check_length(pv, proj.m, "sinogram")
    _check_prox_subset(method, subset, proj)
    if norms is None:
        norms = prox_norms(method, proj, lam)
    x = state.x.values.copy()
    y = None if state.y is None else np.array(state.y, dtype=np.float64)
    if y is None and method is not Method.OSSQS:
        y = np.zeros(proj.m)
    _prox_update(method, x, y, state.u.values, proj, pv, subset, alpha, norms, clip)
    return ProxState(state.x.with_values(x), y, state.u)


def prox_ls_array(cfg: ProxConfig, proj: Projector, p: np.ndarray, u: np.ndarray,
                  norms: Optional[ProxNorms] = None, y0: Optional[np.ndarray] = None):
    """Array-level prox; returns ``(x, y)``.

    ``proj`` and ``p`` are unweighted: ``cfg.weights`` is applied here.
    ``norms`` may be precomputed with :func:`prox_norms` on the weighted system
    to skip setup on repeated calls with the same ``lam``.
    """
    method = cfg.method
    w = cfg.effective_weights()
    pw = proj.weighted(w)
    ptil = p if w is None else p * np.sqrt(w)
    if norms is None:
        norms = prox_norms(method, pw, cfg.lam, cfg.num_subsets)
    if method is Method.OSSQS:
        x = np.zeros(proj.n)
        y = None
        subsets = [g for g in view_groups(proj.num_views, norms.num_subsets)]
    else:
        x = np.array(u, dtype=np.float64)
        y = np.zeros(proj.m) if y0 is None else np.array(y0, dtype=np.float64)
        subsets = make_subsets(method, proj)
    for _ in range(cfg.inner_iters):
        for S in subsets:
            _prox_update(method, x, y, u, pw, ptil, S, cfg.alpha, norms, cfg.clip_enabled)
    return x, y


def prox_ls(cfg: ProxConfig, system, p, u: Volume, grid: Optional[ImageGrid] = None) -> Volume:
    """``prox_{lam f}(u)`` for ``f(x) = ||Ax - p||^2`` (or its weighted form)."""
    proj = as_projector(system, grid or u.grid)
    pv = p.values if isinstance(p, Sinogram) else np.asarray(p, dtype=np.float64)
    check_length(pv, proj.m, "sinogram")
    x, _ = prox_ls_array(cfg, proj, pv, u.values)
    return u.with_values(x)
