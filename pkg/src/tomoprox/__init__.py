"""Iterative sparse-view CT reconstruction with tomography proximal operators
and linearized-ADMM regularization."""
from .core import (FanBeamGeometry, ImageGrid, Mapping, Method, ParallelBeamGeometry,
                   ProxConfig, Sinogram, SolveConfig, Volume, clip, default_alpha, snr,
                   uniform_angles)
from .errors import *  # noqa: F401,F403
from .ladmm import DataTerm, TrexConfig, TrexState, run_trex
from .phantoms import (EllipsePhantomSpec, NoiseModelSpec, poisson_weights,
                       rasterize_phantom, simulate_counts, simulate_measurements)
from .projector import (NormalizationKind, Projector, back_project, forward_project,
                        get_projector, normalization, row_entries)
from .prox import prox_inner_step, prox_ls
from .regularizers import RegKind, RegOp, op_norm, prox_reg, reg_adjoint, reg_apply
from .solvers import run_solver, solver_step

__version__ = "0.1.0"
