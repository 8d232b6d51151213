"""The ART-family prox versus a dense solve of the same problem.

The prox point ``argmin_x ||A x - p||^2 + ||x - u||^2 / (2 lam)`` solves
``(I + 2 lam A^T A) x = u + 2 lam A^T p``. On a small fan system we form
that matrix explicitly and watch each prox method approach it. Clipping
is switched off because ``u`` has negative entries.

ART and single-subset OS-SQS converge to the prox point. SART and BICAV
precondition the lifted system with per-ray and per-pixel sums, so on a
generic geometry they settle on a nearby point; they coincide with the
prox only when the lifted scaling is uniform (unit-length axis-aligned
rays with ``lam = 0.5``). Ordered-subset OS-SQS also stops short.

    python demos/02_prox_oracle.py
"""
import numpy as np

from tomoprox import FanBeamGeometry, ImageGrid, ProxConfig, Volume, get_projector, prox_ls

grid = ImageGrid(8, 8)
geom = FanBeamGeometry((0.2, 1.1, 2.3, 3.9, 5.0), 9, 1.2, 30.0, 12.0)
P = get_projector(geom, grid)
A = P.to_dense()
rng = np.random.default_rng(0)
p = rng.uniform(0, 3, geom.m)
u = rng.standard_normal(grid.n)

lam = 0.5
exact = np.linalg.solve(np.eye(grid.n) + 2 * lam * A.T @ A, u + 2 * lam * A.T @ p)
runs = [("ART", dict(alpha=1.5)), ("SART", dict(alpha=1.5)), ("BICAV", dict(alpha=1.0)),
        ("OSSQS", dict(alpha=1.0, num_subsets=1)), ("OSSQS", dict(alpha=1.0))]
print(f"lam = {lam}; relative error to the dense solve after k sweeps")
print("method     " + " ".join(f"{k:>9d}" for k in (1, 10, 100, 1000)))
for method, kw in runs:
    errs = []
    for k in (1, 10, 100, 1000):
        cfg = ProxConfig(method, lam=lam, inner_iters=k, clip_enabled=False, **kw)
        x = prox_ls(cfg, P, p, Volume(grid, u)).values
        errs.append(np.linalg.norm(x - exact) / np.linalg.norm(exact))
    label = method + (f"/{kw['num_subsets']}" if "num_subsets" in kw else "")
    print(f"{label:<10s} " + " ".join(f"{e:9.2e}" for e in errs))
