"""Regularized reconstruction ``argmin_x f(x) + g(Kx)`` by linearized ADMM.

Each outer iteration performs

    x <- prox_{mu f}(x - rho mu K^T (K x - z + y))
    z <- prox_{g / rho}(K x + y)
    y <- y + K x - z

with ``f`` the (weighted) least-squares data term solved by a few sweeps of an
ART-family prox, and ``g`` one of the ITV / ATV / SAD penalties. Requires
``mu * rho * ||K||^2 < 1``.
"""
from __future__ import annotations

import csv
import enum
import time
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Sequence

import numpy as np

from .core import ImageGrid, Mapping, ProxConfig, Sinogram, Volume, snr_values
from .errors import MissingIntensity, StepSizeViolation
from .phantoms import poisson_weights
from .projector import as_projector, check_length
from .prox import prox_ls_array, prox_norms
from .regularizers import RegOp, op_norm, prox_reg, reg_adjoint_array, reg_apply

NORM_SAFETY = 1.01
AUTO_MU_FACTOR = 0.99


class DataTerm(str, enum.Enum):
    GAUSSIAN_LS = "GAUSSIAN"
    POISSON_WLS = "POISSON"


@dataclass(frozen=True, eq=False)
class TrexConfig:
    prox_cfg: ProxConfig
    reg: RegOp
    rho: float
    mu: Optional[float] = None
    outer_iters: int = 30
    data_term: DataTerm = DataTerm.GAUSSIAN_LS
    mapping: Mapping = Mapping.R1
    ground_truth: Optional[Volume] = None
    k_norm: Optional[float] = None
    norm_tol: float = 1e-6

    def __post_init__(self):
        object.__setattr__(self, "data_term", DataTerm(self.data_term))
        object.__setattr__(self, "mapping", Mapping(self.mapping))
        if not self.rho > 0:
            raise ValueError("rho must be positive")
        if self.outer_iters < 0:
            raise ValueError("outer_iters must be >= 0")
        if self.k_norm is None:
            object.__setattr__(self, "k_norm", op_norm(self.reg, tol=self.norm_tol))
        bound = NORM_SAFETY * self.k_norm
        if self.mu is None:
            object.__setattr__(self, "mu", AUTO_MU_FACTOR / (self.rho * bound ** 2))
        if not self.mu > 0:
            raise StepSizeViolation("mu must be positive")
        if self.mu * self.rho * bound ** 2 >= 1.0:
            raise StepSizeViolation(
                f"mu*rho*||K||^2 = {self.mu * self.rho * bound ** 2:.4g} >= 1 "
                f"(||K|| ~ {self.k_norm:.4g} with 1% margin); use mu < "
                f"{1.0 / (self.rho * bound ** 2):.4g}")


@dataclass
class TrexTraceRow:
    iter: int
    snr_db: float
    primal_res: float
    dual_res: float
    wall_ms: float


@dataclass
class TrexState:
    x: Volume
    z: np.ndarray
    y: np.ndarray
    trace: List[TrexTraceRow] = field(default_factory=list)


def data_weights(cfg: TrexConfig, it_raw: Optional[Sinogram],
                 weights: Optional[np.ndarray]) -> Optional[np.ndarray]:
    if cfg.data_term is DataTerm.GAUSSIAN_LS:
        return None
    if weights is not None:
        return cfg.mapping.apply(np.asarray(weights, dtype=np.float64))
    if it_raw is None:
        raise MissingIntensity("the Poisson data term needs measured intensities or weights")
    return poisson_weights(it_raw, cfg.mapping)


def run_trex(cfg: TrexConfig, system, p_raw, it_raw: Optional[Sinogram] = None,
             weights: Optional[np.ndarray] = None, grid: Optional[ImageGrid] = None,
             callback: Optional[Callable[[int, dict], None]] = None) -> TrexState:
    """Run ``cfg.outer_iters`` linearized-ADMM iterations from ``x = 0``.

    For the Poisson data term, weights come from ``weights`` (normalized, before
    mapping) or are derived from the measured intensities ``it_raw``.
    ``callback(t, info)`` receives ``x, z, y`` and the previous ``y`` after each
    iteration.
    """
    reg = cfg.reg
    proj = as_projector(system, grid or reg.grid)
    p = p_raw.values if isinstance(p_raw, Sinogram) else np.asarray(p_raw, dtype=np.float64)
    check_length(p, proj.m, "sinogram")
    w = data_weights(cfg, it_raw, weights)
    pcfg = replace(cfg.prox_cfg, lam=cfg.mu, weights=w, mapping=Mapping.R1)
    norms = prox_norms(pcfg.method, proj.weighted(w), cfg.mu, pcfg.num_subsets)
    rho, mu = cfg.rho, cfg.mu
    gt = cfg.ground_truth.values if cfg.ground_truth is not None else None

    x = np.zeros(reg.grid.n)
    kx = reg_apply(reg, x)
    z = kx.copy()
    y = np.zeros(reg.d)
    y_prox = None
    trace: List[TrexTraceRow] = []
    t0 = time.perf_counter()
    for t in range(1, cfg.outer_iters + 1):
        v = x - (rho * mu) * reg_adjoint_array(reg, kx - z + y)
        x, y_prox = prox_ls_array(pcfg, proj, p, v, norms,
                                  y0=y_prox if pcfg.warm_start else None)
        kx = reg_apply(reg, x)
        z_new = prox_reg(reg, 1.0 / rho, kx + y)
        y_prev = y
        y = y + (kx - z_new)
        primal = float(np.linalg.norm(kx - z_new))
        dual = rho * float(np.linalg.norm(reg_adjoint_array(reg, z_new - z)))
        z = z_new
        elapsed = (time.perf_counter() - t0) * 1e3
        if not np.all(np.isfinite(x)):
            raise FloatingPointError(f"iterate diverged at iteration {t}")
        snr_db = snr_values(x, gt) if gt is not None else float("nan")
        trace.append(TrexTraceRow(t, snr_db, primal, dual, elapsed))
        if callback is not None:
            callback(t, {"x": x, "z": z, "y": y, "y_prev": y_prev})
    return TrexState(Volume(reg.grid, x), z, y, trace)


def write_trex_trace_csv(path, trace: Sequence[TrexTraceRow], timing: bool = True) -> None:
    """CSV ``iter,snr_db,primal_res,dual_res,wall_ms``; ``wall_ms`` is ``nan`` unless ``timing``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iter", "snr_db", "primal_res", "dual_res", "wall_ms"])
        for row in trace:
            w.writerow([row.iter, repr(row.snr_db), repr(row.primal_res), repr(row.dual_res),
                        repr(row.wall_ms) if timing else "nan"])
