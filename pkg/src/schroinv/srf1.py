"""SRF1 field files and CSV export.

An SRF1 file is one JSON header line

    {"magic": "SRF1", "n": ..., "m": [...], "nt": ..., "box": [...],
     "T": ..., "kind": "complex"|"real"}

followed by raw little-endian float64 (re, im) pairs, time-major.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .grid import ComplexField, SpaceTimeGrid

MAGIC = "SRF1"


def write_field(path, field: ComplexField, kind: str = "complex"):
    if kind not in ("complex", "real"):
        raise ValueError(f"unknown kind {kind!r}")
    g = field.grid
    header = {
        "magic": MAGIC,
        "n": g.n,
        "m": list(g.m),
        "nt": g.nt,
        "box": list(g.box),
        "T": g.T,
        "kind": kind,
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    flat = np.ascontiguousarray(field.data, dtype="<c16")
    with open(path, "wb") as fh:
        fh.write((json.dumps(header) + "\n").encode("utf-8"))
        fh.write(flat.tobytes())


def read_field(path) -> ComplexField:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("utf-8"))
        if header.get("magic") != MAGIC:
            raise ValueError(f"{path}: not an SRF1 file")
        grid = SpaceTimeGrid(
            m=tuple(header["m"]),
            nt=header["nt"],
            box=tuple(header["box"]),
            T=header["T"],
        )
        raw = fh.read()
    data = np.frombuffer(raw, dtype="<c16").reshape(grid.shape).copy()
    if header["kind"] == "real":
        data = data.real.astype(complex)
    return ComplexField(grid, data)


BUNDLE_MAGIC = "SRB1"


def write_bundle(path, grid: SpaceTimeGrid, meta: dict,
                 arrays: dict[str, np.ndarray]):
    """One JSON header line + concatenated raw '<c16' blobs.

    Used for measurement records, whose payloads (final slices, face
    traces) are not full space-time fields.  `meta` must be JSON-ready.
    """
    names = sorted(arrays)
    header = {
        "magic": BUNDLE_MAGIC,
        "m": list(grid.m),
        "nt": grid.nt,
        "box": list(grid.box),
        "T": grid.T,
        "meta": meta,
        "arrays": {k: list(np.asarray(arrays[k]).shape) for k in names},
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write((json.dumps(header, sort_keys=True) + "\n").encode("utf-8"))
        for k in names:
            fh.write(np.ascontiguousarray(arrays[k], dtype="<c16").tobytes())


def read_bundle(path) -> tuple[SpaceTimeGrid, dict, dict[str, np.ndarray]]:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("utf-8"))
        if header.get("magic") != BUNDLE_MAGIC:
            raise ValueError(f"{path}: not an SRB1 bundle")
        grid = SpaceTimeGrid(m=tuple(header["m"]), nt=header["nt"],
                             box=tuple(header["box"]), T=header["T"])
        arrays = {}
        for k in sorted(header["arrays"]):
            shape = tuple(header["arrays"][k])
            count = int(np.prod(shape)) if shape else 1
            buf = fh.read(16 * count)
            arrays[k] = np.frombuffer(buf, dtype="<c16").reshape(shape).copy()
    return grid, header["meta"], arrays


def export_csv(path, field: ComplexField):
    """Write (t, x_1..x_n, re, im) rows for plotting."""
    g = field.grid
    mesh = np.meshgrid(g.times(), *[g.axis_coords(k) for k in range(g.n)],
                       indexing="ij")
    cols = [c.ravel() for c in mesh]
    cols.append(field.data.real.ravel())
    cols.append(field.data.imag.ravel())
    header = "t," + ",".join(f"x{k + 1}" for k in range(g.n)) + ",re,im"
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, np.column_stack(cols), delimiter=",", header=header,
               comments="")
