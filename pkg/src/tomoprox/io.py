"""File formats: raw float64 volumes/sinograms, 16-bit PGM previews,
geometry headers and output manifests.

Raw files start with one ASCII header line followed by the little-endian
float64 payload in storage order:

* volume:   ``"nx ny pixel_size\\n"`` then ``nx*ny`` values, row-major;
* sinogram: ``"num_views num_dets\\n"`` then ``num_views*num_dets`` values, view-major.

Floats in headers are written with ``repr`` so they parse back exactly.
"""
from __future__ import annotations

import hashlib
import os
from pathlib import Path
from typing import Iterable, List, Optional, Tuple, Union

import numpy as np

from .core import (FanBeamGeometry, Geometry, ImageGrid, ParallelBeamGeometry, Sinogram,
                   Volume)
from .errors import LengthMismatch

PathLike = Union[str, os.PathLike]
_LE = np.dtype("<f8")


def _read_raw(path: PathLike) -> Tuple[List[str], np.ndarray]:
    blob = Path(path).read_bytes()
    nl = blob.find(b"\n")
    if nl < 0:
        raise ValueError(f"{path}: missing header line")
    header = blob[:nl].decode("ascii").split()
    return header, np.frombuffer(blob[nl + 1:], dtype=_LE).astype(np.float64)


def write_volume_raw(path: PathLike, vol: Volume) -> None:
    g = vol.grid
    with open(path, "wb") as fh:
        fh.write(f"{g.nx} {g.ny} {g.pixel_size!r}\n".encode("ascii"))
        fh.write(np.ascontiguousarray(vol.values, dtype=_LE).tobytes())


def read_volume_raw(path: PathLike) -> Volume:
    header, data = _read_raw(path)
    if len(header) != 3:
        raise ValueError(f"{path}: expected header 'nx ny pixel_size'")
    grid = ImageGrid(int(header[0]), int(header[1]), float(header[2]))
    if data.size != grid.n:
        raise LengthMismatch(f"{path}: header says {grid.n} voxels, payload has {data.size}")
    return Volume(grid, data)


def write_sinogram_raw(path: PathLike, sino: Sinogram) -> None:
    g = sino.geometry
    with open(path, "wb") as fh:
        fh.write(f"{g.num_views} {g.num_dets}\n".encode("ascii"))
        fh.write(np.ascontiguousarray(sino.values, dtype=_LE).tobytes())


def read_sinogram_raw(path: PathLike, geometry: Optional[Geometry] = None):
    """Read a raw sinogram.

    With ``geometry`` the result is a :class:`Sinogram` (dimensions must
    agree); without it, an array of shape ``(num_views, num_dets)``.
    """
    header, data = _read_raw(path)
    if len(header) != 2:
        raise ValueError(f"{path}: expected header 'num_views num_dets'")
    nv, nd = int(header[0]), int(header[1])
    if data.size != nv * nd:
        raise LengthMismatch(f"{path}: header says {nv * nd} values, payload has {data.size}")
    if geometry is None:
        return data.reshape(nv, nd)
    if (geometry.num_views, geometry.num_dets) != (nv, nd):
        raise LengthMismatch(f"{path}: {nv}x{nd} sinogram does not fit the geometry")
    return Sinogram(geometry, data)


def write_pgm16(path: PathLike, vol: Volume) -> None:
    """16-bit binary PGM of ``vol``; the linear range goes to ``<path>.scale``.

    Gray level ``k`` stands for ``vmin + k * (vmax - vmin) / 65535``.
    """
    img = vol.as_image()
    vmin, vmax = float(img.min()), float(img.max())
    span = vmax - vmin
    levels = np.zeros(img.shape) if span == 0 else np.rint((img - vmin) / span * 65535.0)
    ny, nx = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{nx} {ny}\n65535\n".encode("ascii"))
        fh.write(levels.astype(">u2").tobytes())
    Path(str(path) + ".scale").write_text(f"min {vmin!r}\nmax {vmax!r}\n")


def read_pgm16(path: PathLike, pixel_size: float = 1.0) -> Volume:
    """Inverse of :func:`write_pgm16` up to 16-bit quantization."""
    blob = Path(path).read_bytes()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while blob[pos:pos + 1].isspace():
            pos += 1
        if blob[pos:pos + 1] == b"#":
            pos = blob.index(b"\n", pos)
            continue
        end = pos
        while not blob[end:end + 1].isspace():
            end += 1
        tokens.append(blob[pos:end].decode("ascii"))
        pos = end
    magic, nx, ny, maxval = tokens[0], int(tokens[1]), int(tokens[2]), int(tokens[3])
    if magic != "P5" or maxval != 65535:
        raise ValueError(f"{path}: not a 16-bit binary PGM")
    levels = np.frombuffer(blob[pos + 1:pos + 1 + 2 * nx * ny], dtype=">u2").astype(np.float64)
    scale = dict(line.split() for line in Path(str(path) + ".scale").read_text().splitlines())
    vmin, vmax = float(scale["min"]), float(scale["max"])
    return Volume(ImageGrid(nx, ny, pixel_size), vmin + levels * (vmax - vmin) / 65535.0)


def geometry_to_text(geom: Geometry) -> str:
    """``key = value`` header describing ``geom``; parsed back by :func:`geometry_from_text`."""
    lines = []
    if isinstance(geom, FanBeamGeometry):
        lines.append("kind = fan")
        fields = ("num_dets", "det_size", "src_to_det", "src_to_iso")
    else:
        lines.append("kind = parallel")
        fields = ("num_dets", "det_size")
    for f in fields:
        lines.append(f"{f} = {getattr(geom, f)!r}")
    lines.append("angles = " + " ".join(repr(a) for a in geom.angles))
    return "\n".join(lines) + "\n"


def geometry_from_text(text: str) -> Geometry:
    kv = {}
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            k, v = line.split("=", 1)
            kv[k.strip()] = v.strip()
    angles = tuple(float(a) for a in kv["angles"].split())
    if kv["kind"] == "fan":
        return FanBeamGeometry(angles, int(kv["num_dets"]), float(kv["det_size"]),
                               float(kv["src_to_det"]), float(kv["src_to_iso"]))
    if kv["kind"] == "parallel":
        return ParallelBeamGeometry(angles, int(kv["num_dets"]), float(kv["det_size"]))
    raise ValueError(f"unknown geometry kind {kv['kind']!r}")


def file_digest(path: PathLike) -> Tuple[int, str]:
    data = Path(path).read_bytes()
    return len(data), hashlib.sha256(data).hexdigest()


def manifest_lines(root: PathLike, paths: Iterable[PathLike]) -> List[str]:
    """``relative_path<TAB>bytes<TAB>sha256`` per file, sorted by path."""
    root = Path(root)
    out = []
    for p in paths:
        n, h = file_digest(p)
        out.append(f"{Path(p).resolve().relative_to(root.resolve()).as_posix()}\t{n}\t{h}")
    return sorted(out)


def write_manifest(root: PathLike, paths: Iterable[PathLike], name: str = "MANIFEST.tsv") -> Path:
    path = Path(root) / name
    path.write_text("".join(line + "\n" for line in manifest_lines(root, paths)))
    return path
