"""Ten iterations of each plain solver on noisy sparse-view data.

Prints the SNR (dB) after every iteration. With few views the
per-view methods (SART, ART, BICAV) climb much faster than the
full-gradient ones (SIRT, CGLS).

    python demos/01_solver_race.py [num_views]
"""
import sys

from tomoprox import SolveConfig, run_solver

from _scene import desk_scene

num_views = int(sys.argv[1]) if len(sys.argv) > 1 else 30
truth, P, p, _ = desk_scene(num_views)
print(f"{num_views} views, 128x128, I0 = 1e5")
print("method  " + " ".join(f"{k:>6d}" for k in range(1, 11)))
for method in ("ART", "SART", "SIRT", "BSSART", "BICAV", "OSSQS", "CGLS"):
    alpha = 1.0 if method in ("BICAV", "CGLS") else 1.99
    state = run_solver(SolveConfig(method, alpha, 10), P, p, ground_truth=truth)
    print(f"{method:<7s} " + " ".join(f"{r.snr_db:6.2f}" for r in state.trace))
