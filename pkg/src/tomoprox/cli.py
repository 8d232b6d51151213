"""Batch front end: ``tomoprox {simulate,reconstruct,compare}``.

Experiment files are INI-style (``[section]`` headers, ``key = value``
lines, ``#``/``;`` comments). Recognized keys and their defaults::

    [experiment]
    phantom = shepp_logan     # builtin name or path to an ellipse table
    nx = 128
    ny = 128                  # defaults to nx
    pixel_size = 4.0          # mm
    mu_scale = 0.02           # phantom intensity -> attenuation per mm
    seed = 0
    out = out

    [geometry]
    kind = fan                # or parallel
    num_dets = 222
    det_size = 4.0956         # mm
    src_to_det = 949.075      # fan only
    src_to_iso = 541.0        # fan only
    arc_deg = 360
    start_deg = 0
    endpoint = false
    views = 15, 30, 90

    [noise]
    i0 = 100000               # omit for noiseless data only

    [methods]
    list = SART, SIRT, CGLS, TREX-SART-SAD
    outer_iters = 30
    inner_iters = 2
    alpha = auto              # 1.99 up to 30 views, 1 above (plain solvers)
    prox_alpha = 1.99
    rho = auto                # 25 up to 15 views, else 50
    sigma = auto              # 0.05 up to 15 views, else 0.1
    mu = auto                 # 0.99 / (rho (1.01 ||K||)^2)
    lambda_map = r1

    [method.SART]             # per-method overrides of any [methods] key
    alpha = 1.0

Command-line flags override file values. Method names are solver names
(``ART SART SIRT BSSART BICAV OSSQS CGLS``) or
``TREX-<PROX>-<REG>[-POISSON|-GAUSS]`` with PROX in ``ART SART BICAV OSSQS``
and REG in ``ITV ATV SAD``; the data term defaults to POISSON when measured
counts exist.

Outputs land under ``<out>/views_<NNN>/``; each command writes
``MANIFEST.tsv`` (path, bytes, sha256) in ``<out>``. Failures print one JSON
line ``{"error": <type>, "message": <text>}`` on stderr and exit with status 2.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import json
import math
import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from .core import (FanBeamGeometry, ImageGrid, Mapping, Method, ParallelBeamGeometry,
                   ProxConfig, SolveConfig, default_alpha, uniform_angles)
from .errors import StepSizeViolation, TomoError
from .io import (geometry_to_text, read_sinogram_raw, read_volume_raw, write_manifest,
                 write_pgm16, write_sinogram_raw, write_volume_raw)
from .ladmm import DataTerm, TrexConfig, run_trex, write_trex_trace_csv
from .phantoms import (BUILTIN_PHANTOMS, EllipsePhantomSpec, NoiseModelSpec,
                       counts_to_line_integrals, rasterize_phantom, simulate_counts)
from .projector import forward_project, get_projector
from .regularizers import RegKind, RegOp
from .solvers import run_solver, write_trace_csv

METHOD_KEYS = ("outer_iters", "inner_iters", "alpha", "prox_alpha", "rho", "sigma", "mu",
               "lambda_map")


@dataclass
class ExperimentSpec:
    phantom: str = "shepp_logan"
    nx: int = 128
    ny: int = 128
    pixel_size: float = 4.0
    mu_scale: float = 0.02
    seed: int = 0
    out: str = "out"
    geometry_kind: str = "fan"
    num_dets: int = 222
    det_size: float = 4 * 1.0239
    src_to_det: float = 949.075
    src_to_iso: float = 541.0
    arc_deg: float = 360.0
    start_deg: float = 0.0
    endpoint: bool = False
    views: List[int] = field(default_factory=lambda: [15, 30, 90])
    i0: Optional[float] = 1e5
    methods: List[str] = field(default_factory=lambda: ["SART", "SIRT", "CGLS", "TREX-SART-SAD"])
    params: Dict[str, str] = field(default_factory=dict)
    overrides: Dict[str, Dict[str, str]] = field(default_factory=dict)

    def validate(self) -> "ExperimentSpec":
        if self.phantom not in BUILTIN_PHANTOMS and not Path(self.phantom).is_file():
            raise FileNotFoundError(f"phantom file not found: {self.phantom}")
        if not self.views or any(v < 1 for v in self.views):
            raise ValueError("view counts must be >= 1")
        if self.geometry_kind not in ("fan", "parallel"):
            raise ValueError("geometry kind must be 'fan' or 'parallel'")
        for m in self.methods:
            parse_method(m)
        return self

    @property
    def grid(self) -> ImageGrid:
        return ImageGrid(self.nx, self.ny, self.pixel_size)

    def geometry(self, num_views: int):
        angles = uniform_angles(num_views, math.radians(self.arc_deg),
                                math.radians(self.start_deg), self.endpoint)
        if self.geometry_kind == "fan":
            return FanBeamGeometry(angles, self.num_dets, self.det_size, self.src_to_det,
                                   self.src_to_iso)
        return ParallelBeamGeometry(angles, self.num_dets, self.det_size)

    def param(self, method: str, key: str, default: str = "auto") -> str:
        return self.overrides.get(method, {}).get(key, self.params.get(key, default))


def _csv_list(text: str) -> List[str]:
    return [t.strip() for t in text.replace(";", ",").split(",") if t.strip()]


def load_spec(path: Optional[str]) -> ExperimentSpec:
    spec = ExperimentSpec()
    if path is None:
        return spec
    if not Path(path).is_file():
        raise FileNotFoundError(f"spec file not found: {path}")
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    cp.read(path)
    base = Path(path).parent
    if cp.has_section("experiment"):
        s = cp["experiment"]
        spec.phantom = s.get("phantom", spec.phantom)
        if spec.phantom not in BUILTIN_PHANTOMS and not Path(spec.phantom).is_absolute():
            spec.phantom = str(base / spec.phantom)
        spec.nx = s.getint("nx", spec.nx)
        spec.ny = s.getint("ny", spec.nx)
        spec.pixel_size = s.getfloat("pixel_size", spec.pixel_size)
        spec.mu_scale = s.getfloat("mu_scale", spec.mu_scale)
        spec.seed = s.getint("seed", spec.seed)
        spec.out = s.get("out", spec.out)
    if cp.has_section("geometry"):
        g = cp["geometry"]
        spec.geometry_kind = g.get("kind", spec.geometry_kind)
        spec.num_dets = g.getint("num_dets", spec.num_dets)
        spec.det_size = g.getfloat("det_size", spec.det_size)
        spec.src_to_det = g.getfloat("src_to_det", spec.src_to_det)
        spec.src_to_iso = g.getfloat("src_to_iso", spec.src_to_iso)
        spec.arc_deg = g.getfloat("arc_deg", spec.arc_deg)
        spec.start_deg = g.getfloat("start_deg", spec.start_deg)
        spec.endpoint = g.getboolean("endpoint", spec.endpoint)
        if "views" in g:
            spec.views = [int(v) for v in _csv_list(g["views"])]
    if cp.has_section("noise"):
        spec.i0 = cp["noise"].getfloat("i0") if "i0" in cp["noise"] else None
    else:
        spec.i0 = None
    if cp.has_section("methods"):
        m = cp["methods"]
        if "list" in m:
            spec.methods = _csv_list(m["list"])
        spec.params.update({k: v for k, v in m.items() if k in METHOD_KEYS})
    for sec in cp.sections():
        if sec.startswith("method."):
            spec.overrides[sec[len("method."):]] = dict(cp[sec])
    return spec


@dataclass(frozen=True)
class MethodSpec:
    name: str
    solver: Optional[Method] = None
    prox: Optional[Method] = None
    reg: Optional[RegKind] = None
    data_term: Optional[DataTerm] = None   # None: pick from available data

    @property
    def is_trex(self) -> bool:
        return self.prox is not None


def parse_method(name: str) -> MethodSpec:
    parts = name.upper().split("-")
    if parts[0] != "TREX":
        if len(parts) != 1:
            raise ValueError(f"unknown method {name!r}")
        return MethodSpec(name, solver=Method(parts[0]))
    if len(parts) not in (3, 4):
        raise ValueError(f"method {name!r} should look like TREX-<PROX>-<REG>[-POISSON|-GAUSS]")
    prox = Method(parts[1])
    if prox not in (Method.ART, Method.SART, Method.BICAV, Method.OSSQS):
        raise ValueError(f"{prox.value} has no proximal operator")
    dt = None
    if len(parts) == 4:
        dt = {"POISSON": DataTerm.POISSON_WLS, "GAUSS": DataTerm.GAUSSIAN_LS,
              "GAUSSIAN": DataTerm.GAUSSIAN_LS}.get(parts[3])
        if dt is None:
            raise ValueError(f"unknown data term {parts[3]!r}")
    return MethodSpec(name, prox=prox, reg=RegKind(parts[2]), data_term=dt)


def _num(text: str, auto: float) -> float:
    return auto if str(text).strip().lower() == "auto" else float(text)


@dataclass
class CellData:
    truth: object
    clean: object
    noisy: object = None
    counts: object = None

    @property
    def measured(self):
        return self.noisy if self.noisy is not None else self.clean


def cell_dir(spec: ExperimentSpec, num_views: int) -> Path:
    return Path(spec.out) / f"views_{num_views:03d}"


def simulate_cell(spec: ExperimentSpec, num_views: int) -> CellData:
    grid = spec.grid
    geom = spec.geometry(num_views)
    truth = rasterize_phantom(EllipsePhantomSpec.load(spec.phantom), grid, spec.mu_scale)
    clean = forward_project(geom, truth)
    data = CellData(truth, clean)
    if spec.i0 is not None:
        data.counts = simulate_counts(clean, NoiseModelSpec(spec.i0, spec.seed))
        data.noisy = counts_to_line_integrals(data.counts, spec.i0)
    return data


def write_cell_inputs(spec: ExperimentSpec, num_views: int, data: CellData) -> List[Path]:
    d = cell_dir(spec, num_views)
    d.mkdir(parents=True, exist_ok=True)
    files = [d / "geometry.txt", d / "phantom.raw", d / "phantom.pgm", d / "phantom.pgm.scale",
             d / "sino_clean.raw"]
    files[0].write_text(geometry_to_text(data.clean.geometry))
    write_volume_raw(files[1], data.truth)
    write_pgm16(files[2], data.truth)
    write_sinogram_raw(files[4], data.clean)
    if data.noisy is not None:
        write_sinogram_raw(d / "sino_noisy.raw", data.noisy)
        write_sinogram_raw(d / "counts.raw", data.counts)
        files += [d / "sino_noisy.raw", d / "counts.raw"]
    return files


def read_cell_inputs(spec: ExperimentSpec, num_views: int) -> CellData:
    d = cell_dir(spec, num_views)
    if not (d / "sino_clean.raw").is_file():
        raise FileNotFoundError(f"no simulated data in {d}; run 'simulate' first")
    geom = spec.geometry(num_views)
    data = CellData(read_volume_raw(d / "phantom.raw"), read_sinogram_raw(d / "sino_clean.raw", geom))
    if (d / "sino_noisy.raw").is_file():
        data.noisy = read_sinogram_raw(d / "sino_noisy.raw", geom)
        data.counts = read_sinogram_raw(d / "counts.raw", geom)
    return data


def check_method(spec: ExperimentSpec, ms: MethodSpec) -> None:
    """Reject configurations that cannot run before any work starts."""
    if ms.is_trex and ms.prox is Method.OSSQS and spec.param(ms.name, "mu") == "auto":
        raise StepSizeViolation(
            f"{ms.name}: the OS-SQS prox needs a hand-tuned mu; pass --mu (it must satisfy "
            "mu*rho*||K||^2 < 1)")


def run_method(spec: ExperimentSpec, ms: MethodSpec, num_views: int, data: CellData):
    """Reconstruct one (method, view count) cell; returns ``(volume, trace, is_trex)``."""
    proj = get_projector(data.clean.geometry, spec.grid)
    iters = int(spec.param(ms.name, "outer_iters", "30"))
    if not ms.is_trex:
        alpha = _num(spec.param(ms.name, "alpha"), default_alpha(num_views))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            cfg = SolveConfig(ms.solver, alpha, iters)
        st = run_solver(cfg, proj, data.measured, data.truth)
        return st.x, st.trace, False
    check_method(spec, ms)
    sparse = num_views <= 15
    sigma = _num(spec.param(ms.name, "sigma"), 0.05 if sparse else 0.1)
    rho = _num(spec.param(ms.name, "rho"), 25.0 if sparse else 50.0)
    mu_txt = spec.param(ms.name, "mu")
    mu = None if mu_txt == "auto" else float(mu_txt)
    dt = ms.data_term or (DataTerm.POISSON_WLS if data.counts is not None else DataTerm.GAUSSIAN_LS)
    pcfg = ProxConfig(ms.prox, _num(spec.param(ms.name, "prox_alpha"), 1.99), 1.0,
                      int(spec.param(ms.name, "inner_iters", "2")))
    cfg = TrexConfig(pcfg, RegOp(ms.reg, spec.grid, sigma), rho, mu, iters, dt,
                     Mapping(spec.param(ms.name, "lambda_map", "r1").upper()), data.truth)
    st = run_trex(cfg, proj, data.measured, it_raw=data.counts)
    return st.x, st.trace, True


def write_cell_outputs(spec: ExperimentSpec, ms: MethodSpec, num_views: int, result,
                       timing: bool) -> List[Path]:
    vol, trace, is_trex = result
    d = cell_dir(spec, num_views) / ms.name
    d.mkdir(parents=True, exist_ok=True)
    files = [d / "recon.raw", d / "recon.pgm", d / "recon.pgm.scale", d / "trace.csv"]
    write_volume_raw(files[0], vol)
    write_pgm16(files[1], vol)
    (write_trex_trace_csv if is_trex else write_trace_csv)(files[3], trace, timing)
    return files


def _max_snr(trace):
    snrs = [r.snr_db for r in trace]
    if not snrs:
        return float("nan"), 0
    k = int(np.nanargmax(snrs)) if not all(math.isnan(s) for s in snrs) else 0
    return snrs[k], k + 1


def _workers(jobs: int) -> int:
    cap = os.environ.get("TREX_THREADS")
    if cap:
        jobs = min(jobs, max(1, int(cap)))
    return max(1, jobs)


def _map(fn, items: Sequence, jobs: int) -> list:
    if _workers(jobs) == 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(_workers(jobs)) as pool:
        return list(pool.map(fn, items))


def cmd_simulate(spec: ExperimentSpec, jobs: int = 1) -> List[Path]:
    spec.validate()
    Path(spec.out).mkdir(parents=True, exist_ok=True)
    per_cell = _map(lambda nv: write_cell_inputs(spec, nv, simulate_cell(spec, nv)),
                    spec.views, jobs)
    files = [f for fs in per_cell for f in fs]
    files.append(write_manifest(spec.out, files))
    return files


def _reconstruct_all(spec: ExperimentSpec, datas: Dict[int, CellData], jobs: int, timing: bool):
    methods = [parse_method(m) for m in spec.methods]
    for ms in methods:
        check_method(spec, ms)
    cells = [(ms, nv) for nv in spec.views for ms in methods]

    def one(cell):
        ms, nv = cell
        result = run_method(spec, ms, nv, datas[nv])
        return cell, result, write_cell_outputs(spec, ms, nv, result, timing)

    return _map(one, cells, jobs)


def cmd_reconstruct(spec: ExperimentSpec, jobs: int = 1, timing: bool = False) -> List[Path]:
    spec.validate()
    datas = {nv: read_cell_inputs(spec, nv) for nv in spec.views}
    files = [f for _, _, fs in _reconstruct_all(spec, datas, jobs, timing) for f in fs]
    files.append(write_manifest(spec.out, files, "MANIFEST_reconstruct.tsv"))
    return files


def cmd_compare(spec: ExperimentSpec, jobs: int = 1, timing: bool = False) -> List[Path]:
    """Simulate every view count, run every method on it and aggregate max SNR."""
    spec.validate()
    Path(spec.out).mkdir(parents=True, exist_ok=True)
    datas = {nv: simulate_cell(spec, nv) for nv in spec.views}
    files = [f for nv in spec.views for f in write_cell_inputs(spec, nv, datas[nv])]
    results = _reconstruct_all(spec, datas, jobs, timing)
    agg = Path(spec.out) / "aggregate.csv"
    with open(agg, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "num_views", "max_snr_db", "argmax_iter", "final_snr_db"])
        for (ms, nv), (_, trace, _), fs in results:
            best, at = _max_snr(trace)
            final = trace[-1].snr_db if trace else float("nan")
            w.writerow([ms.name, nv, repr(best), at, repr(final)])
            files += fs
    files.append(agg)
    files.append(write_manifest(spec.out, files))
    return files


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tomoprox", description="Sparse-view CT reconstruction runs.")
    ap.add_argument("verb", choices=("simulate", "reconstruct", "compare"))
    ap.add_argument("--spec", help="experiment file (INI)")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--out")
    ap.add_argument("--jobs", type=int, default=1, help="cells run concurrently (capped by TREX_THREADS)")
    ap.add_argument("--method", help="comma-separated method names")
    ap.add_argument("--views", help="comma-separated view counts")
    ap.add_argument("--iters", help="outer iterations")
    ap.add_argument("--alpha")
    ap.add_argument("--rho")
    ap.add_argument("--mu")
    ap.add_argument("--sigma")
    ap.add_argument("--lambda-map", choices=("r1", "r2", "r3"))
    ap.add_argument("--inner-iters")
    ap.add_argument("--i0", help="emitted photon count, or 'none' for noiseless data")
    ap.add_argument("--timing", action="store_true", help="record wall-clock times in traces")
    return ap


def apply_flags(spec: ExperimentSpec, args) -> ExperimentSpec:
    if args.seed is not None:
        spec.seed = args.seed
    if args.out is not None:
        spec.out = args.out
    if args.method:
        spec.methods = _csv_list(args.method)
    if args.views:
        spec.views = [int(v) for v in _csv_list(args.views)]
    if args.i0 is not None:
        spec.i0 = None if args.i0.lower() == "none" else float(args.i0)
    flags = {"outer_iters": args.iters, "alpha": args.alpha, "prox_alpha": args.alpha,
             "rho": args.rho, "mu": args.mu, "sigma": args.sigma,
             "lambda_map": args.lambda_map, "inner_iters": args.inner_iters}
    for k, v in flags.items():
        if v is not None:
            spec.params[k] = v
            for ov in spec.overrides.values():
                ov.pop(k, None)
    return spec


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = apply_flags(load_spec(args.spec), args)
        if args.verb == "simulate":
            cmd_simulate(spec, args.jobs)
        elif args.verb == "reconstruct":
            cmd_reconstruct(spec, args.jobs, args.timing)
        else:
            cmd_compare(spec, args.jobs, args.timing)
    except (TomoError, ValueError, OSError, KeyError, FloatingPointError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
