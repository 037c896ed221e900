"""Experiment configuration: one TOML file of nested tables.

Every pipeline default stated elsewhere in the package is also the
config default, so an empty file (or no file) reproduces the standard
benchmark experiment.  Coefficients are declared either by benchmark
name ("q_bench", "b_bench", "zero") or by path to an SRF1 field file.
"""

from __future__ import annotations

import copy
from pathlib import Path

import numpy as np

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

from . import benchmarks
from .grid import SpaceTimeGrid, VectorField
from .solver import NonlinearitySpec, Potential
from .srf1 import read_field


class ConfigError(Exception):
    """Malformed configuration; message carries file/line diagnostics."""


DEFAULTS: dict = {
    "grid": {"m": [65, 65], "nt": 128, "box": [1.0, 1.0], "T": 1.0},
    "coefficients": {
        "q": "q_bench",
        "b": "b_bench",
        "remainder": "cubic_flat",
        "remainder_scale": 1.0,
    },
    "forward": {"phi": "gaussian", "eps": 1.0},
    "measure": {
        "eps": [1e-6],
        "probes": [
            {"lam": 16.0, "omega": [1.0, 0.0], "tau": 0.0, "xi": [0.0, 0.0]},
            {"lam": 16.0, "omega": [0.0, 1.0], "tau": 0.0, "xi": [0.0, 0.0]},
        ],
    },
    "reconstruct_q": {
        "mode": "extracted",
        "j_max": 4,
        "k_max": 4,
        "richardson": False,
    },
    "reconstruct_b": {
        "mode": "direct",
        "j_max": 2,
        "k_max": 3,
        "carrier_mode": 1,
        "richardson": False,
    },
    "eps_lab": {"eps": [0.2, 0.1, 0.05, 0.025]},
    "tolerances": {"solver_tol": 1e-10, "picard_tol": 1e-7},
    "output": {"dir": "experiment", "seed": 0},
}


def _merge(base: dict, overlay: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in overlay.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{where!r} must be a table")
            out[key] = _merge(base[key], value, where)
        else:
            out[key] = value
    return out


def load_config(path=None) -> dict:
    """Parse a TOML config, merge over the defaults, validate keys.

    path None returns the plain defaults.  Raises ConfigError with the
    parser's line diagnostics on malformed input or unknown keys.
    """
    if path is None:
        return copy.deepcopy(DEFAULTS)
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}")
    try:
        return _merge(DEFAULTS, raw)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}")


def build_grid(cfg: dict) -> SpaceTimeGrid:
    g = cfg["grid"]
    try:
        return SpaceTimeGrid(m=tuple(int(v) for v in g["m"]),
                             nt=int(g["nt"]),
                             box=tuple(float(v) for v in g["box"]),
                             T=float(g["T"]))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid [grid] table: {exc}")


def build_potential(cfg: dict, grid: SpaceTimeGrid) -> Potential:
    name = cfg["coefficients"]["q"]
    if name == "q_bench":
        return benchmarks.q_bench(grid)
    if name == "zero":
        return Potential.zeros(grid)
    field = read_field(name)
    if field.grid != grid:
        raise ConfigError(f"potential file {name!r} grid mismatch")
    return Potential(grid, field.data.real)


def build_b(cfg: dict, grid: SpaceTimeGrid) -> VectorField | None:
    name = cfg["coefficients"]["b"]
    if name == "b_bench":
        return benchmarks.b_bench(grid)
    if name in ("zero", "none", ""):
        return None
    paths = name if isinstance(name, list) else [name]
    comps = []
    for p in paths:
        field = read_field(p)
        if field.grid != grid:
            raise ConfigError(f"coefficient file {p!r} grid mismatch")
        comps.append(field.data.real)
    if len(comps) != grid.n:
        raise ConfigError(f"b needs {grid.n} component files, got {len(comps)}")
    return VectorField(grid, np.stack(comps))


def build_nonlinearity(cfg: dict, grid: SpaceTimeGrid) -> NonlinearitySpec:
    c = cfg["coefficients"]
    return NonlinearitySpec(b=build_b(cfg, grid),
                            remainder_kind=c["remainder"],
                            remainder_scale=float(c["remainder_scale"]))
