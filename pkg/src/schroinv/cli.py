"""Batch command-line driver.

Subcommands cover the full experiment pipeline: `forward` (one IBVP
solve), `measure` (input-output records over a probe dictionary),
`reconstruct-q`, `reconstruct-b`, `eps-lab`, `verify` (the invariant
suite) and `report` (aggregate JSON reports).  All state lives in an
experiment directory (config copy, probes/, measurements/, recovered/,
reports/); reruns with the same config and --threads 1 are
byte-identical.

Exit codes: 0 success, 1 pipeline failure (failing stage named on
stderr), 2 malformed configuration.
"""

from __future__ import annotations

import argparse
import json
import os
import shutil
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import (
    ConfigError,
    build_grid,
    build_nonlinearity,
    build_potential,
    load_config,
)
from .grid import BoundaryTrace, ComplexField
from .srf1 import export_csv, write_field


def _dump_toml(d: dict, prefix: str = "") -> str:
    """Minimal TOML writer for the config dictionary shape we use."""
    lines = []
    scalars = {k: v for k, v in d.items() if not isinstance(v, dict)}
    tables = {k: v for k, v in d.items() if isinstance(v, dict)}
    for k, v in scalars.items():
        lines.append(f"{k} = {json.dumps(v)}")
    for k, v in tables.items():
        name = f"{prefix}.{k}" if prefix else k
        lines.append(f"\n[{name}]")
        lines.append(_dump_toml(v, name))
    return "\n".join(lines)


def _prepare_outdir(args, cfg) -> Path:
    out = Path(args.out or cfg["output"]["dir"])
    for sub in ("probes", "measurements", "recovered", "reports"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    if args.config:
        shutil.copyfile(args.config, out / "config.toml")
    else:
        (out / "config.toml").write_text(_dump_toml(cfg) + "\n")
    os.environ.setdefault("SCHROINV_CACHE_DIR", str(out / "probes"))
    return out


def _limit_threads(n: int | None):
    if n is None:
        return
    try:
        from threadpoolctl import threadpool_limits
        threadpool_limits(limits=n)
    except ImportError:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS"):
            os.environ[var] = str(n)


def _write_json(path: Path, payload: dict):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=1, sort_keys=True,
                               default=float) + "\n")


def _real_field(grid, values) -> ComplexField:
    return ComplexField(grid, np.asarray(values, dtype=float) + 0j)


# ---------------------------------------------------------------------------
# subcommands


def _cmd_forward(args, cfg, out: Path) -> int:
    from .solver import solve_nonlinear

    grid = build_grid(cfg)
    q = build_potential(cfg, grid)
    nl = build_nonlinearity(cfg, grid)
    kind = cfg["forward"]["phi"]
    if kind == "zero":
        phi = np.zeros(grid.m, dtype=complex)
    elif kind == "gaussian":
        xs = grid.space_mesh()
        r2 = sum(((x - 0.5 * box) / (0.15 * box)) ** 2
                 for x, box in zip(xs, grid.box))
        phi = np.exp(-r2).astype(complex)
        for x, box in zip(xs, grid.box):   # exact homogeneous trace
            phi = phi * np.sin(np.pi * x / box)
    elif kind == "mode":
        xs = grid.space_mesh()
        phi = np.ones(grid.m, dtype=complex)
        for x, box in zip(xs, grid.box):
            phi = phi * np.sin(np.pi * x / box)
    else:
        from .srf1 import read_field
        phi = read_field(kind).data[0]
    eps = float(cfg["forward"]["eps"])
    sol = solve_nonlinear(q, nl, phi, BoundaryTrace.zeros(grid), eps,
                          picard_tol=float(cfg["tolerances"]["picard_tol"]))
    write_field(out / "recovered" / "forward.srf1", sol.field)
    _write_json(out / "reports" / "forward.json", {
        "eps": eps,
        "phi": kind,
        "picard": sol.report.to_dict(),
        "final_l2": float(np.sqrt(np.sum(np.abs(sol.field.data[-1]) ** 2)
                                  * np.prod(grid.h))),
    })
    return 0


def _cmd_measure(args, cfg, out: Path) -> int:
    from .measurement import apply_io_map, probe_boundary_data, \
        save_measurement
    from .probes import ProbeSpec

    grid = build_grid(cfg)
    q = build_potential(cfg, grid)
    nl = build_nonlinearity(cfg, grid)
    written = []
    for entry in cfg["measure"]["probes"]:
        spec = ProbeSpec(lam=float(entry["lam"]),
                         omega=tuple(entry["omega"]),
                         tau=float(entry.get("tau", 0.0)),
                         xi=tuple(entry["xi"]) if entry.get("xi") else None,
                         sign=-1)
        phi, f = probe_boundary_data(grid, spec)
        for eps in cfg["measure"]["eps"]:
            meas = apply_io_map(
                q, nl, phi, f, float(eps), input_id=spec.key(),
                carrier=spec.carrier(),
                picard_tol=float(cfg["tolerances"]["picard_tol"]))
            name = f"meas_{spec.key()}_eps{eps:g}.srb1"
            save_measurement(out / "measurements" / name, meas)
            written.append(name)
    _write_json(out / "reports" / "measure.json",
                {"records": written, "eps": list(cfg["measure"]["eps"])})
    return 0


def _q_source(cfg, q, grid):
    from .measurement import DirectQSource, ExtractedQSource
    mode = cfg["reconstruct_q"]["mode"]
    if mode == "direct":
        return DirectQSource(q)
    if mode == "extracted":
        nl = build_nonlinearity(cfg, grid)
        return ExtractedQSource(
            q, nl, picard_tol=float(cfg["tolerances"]["picard_tol"]))
    raise ConfigError(f"unknown reconstruct_q.mode {mode!r}")


def _cmd_reconstruct_q(args, cfg, out: Path) -> int:
    from .reconstruct_q import reconstruction_report, run_q_reconstruction

    grid = build_grid(cfg)
    q = build_potential(cfg, grid)
    rq = cfg["reconstruct_q"]
    recovered, samples, report = run_q_reconstruction(
        _q_source(cfg, q, grid), grid, j_max=int(rq["j_max"]),
        k_max=int(rq["k_max"]), richardson=bool(rq["richardson"]))
    report = reconstruction_report(recovered, q, report)
    field = _real_field(grid, recovered.values)
    write_field(out / "recovered" / "q.srf1", field, kind="real")
    export_csv(out / "recovered" / "q.csv", field)
    _write_json(out / "reports" / "reconstruct_q.json", report)
    print(f"reconstruct-q: l2_rel={report['l2_rel']:.4f} "
          f"imag_ratio={report['imag_ratio']:.4f}")
    return 0


def _cmd_reconstruct_b(args, cfg, out: Path) -> int:
    from .reconstruct_b import (
        DirectBSource,
        PolarizedBSource,
        b_reconstruction_report,
        run_b_reconstruction,
    )
    from .solver import Potential
    from .srf1 import read_field

    grid = build_grid(cfg)
    q_true = build_potential(cfg, grid)
    b_true = build_nonlinearity(cfg, grid).b
    if b_true is None:
        raise ConfigError("reconstruct-b needs a nonzero [coefficients].b")
    q_path = out / "recovered" / "q.srf1"
    if q_path.exists():
        q_probes = Potential(grid, read_field(q_path).data.real)
    else:
        q_probes = q_true
    rb = cfg["reconstruct_b"]
    if rb["mode"] == "direct":
        source = DirectBSource(q_true, b_true)
    elif rb["mode"] == "polarized":
        source = PolarizedBSource(
            q_true, build_nonlinearity(cfg, grid),
            picard_tol=float(cfg["tolerances"]["picard_tol"]))
    else:
        raise ConfigError(f"unknown reconstruct_b.mode {rb['mode']!r}")
    recovered, fields, report = run_b_reconstruction(
        source, q_probes, j_max=int(rb["j_max"]), k_max=int(rb["k_max"]),
        carrier_mode=int(rb["carrier_mode"]),
        richardson=bool(rb["richardson"]))
    if b_true is not None:
        report = b_reconstruction_report(recovered, b_true, report)
    for a in range(grid.n):
        comp = _real_field(grid, recovered.data[a])
        write_field(out / "recovered" / f"b{a + 1}.srf1", comp, kind="real")
        export_csv(out / "recovered" / f"b{a + 1}.csv", comp)
    # determinant-coverage map: 1 where the probe rows were accepted
    rows = np.stack([np.moveaxis(f.probe.demodulated_rows(), 0, -1)
                     for f in fields], axis=-2)
    accepted = np.abs(np.linalg.det(rows)) >= report["delta_det"]
    write_field(out / "recovered" / "coverage.srf1",
                _real_field(grid, accepted.astype(float)), kind="real")
    _write_json(out / "reports" / "reconstruct_b.json", report)
    msg = f"reconstruct-b: coverage={report['det_coverage']:.3f}"
    if "l2_rel" in report:
        msg += f" l2_rel={report['l2_rel']:.4f}"
    print(msg)
    return 0


def _cmd_eps_lab(args, cfg, out: Path) -> int:
    from .epsilon_lab import (
        check_remainder_admissibility,
        contraction_study,
        expansion_residual_study,
    )

    grid = build_grid(cfg)
    q = build_potential(cfg, grid)
    nl = build_nonlinearity(cfg, grid)
    xs = grid.space_mesh()
    phi = np.ones(grid.m, dtype=complex)
    for x, box in zip(xs, grid.box):
        phi = phi * np.sin(np.pi * x / box)
    f = BoundaryTrace.zeros(grid)
    eps_list = [float(e) for e in cfg["eps_lab"]["eps"]]
    expansion = expansion_residual_study(q, nl, phi, f, eps_list)
    contraction = [contraction_study(q, nl, phi, f, e) for e in eps_list]
    admissibility = check_remainder_admissibility(nl, n=grid.n)
    _write_json(out / "reports" / "eps_lab.json", {
        "expansion": expansion,
        "contraction": contraction,
        "remainder": admissibility,
    })
    csv = ["eps,residual"] + [f"{e},{r}" for e, r in
                              zip(expansion["eps"], expansion["residual"])]
    (out / "reports" / "eps_lab.csv").write_text("\n".join(csv) + "\n")
    print(f"eps-lab: slope={expansion['slope']}")
    return 0


def _cmd_verify(args, cfg, out: Path) -> int:
    from .verify import run_verify

    report = run_verify()
    _write_json(out / "reports" / "verify.json", report)
    for c in report["checks"]:
        print(f"{'PASS' if c['passed'] else 'FAIL'}  {c['name']}"
              f"  value={c['value']:.3g}")
    if not report["all_passed"]:
        print("verify: some checks failed", file=sys.stderr)
        return 1
    return 0


def _cmd_report(args, cfg, out: Path) -> int:
    reports = {}
    for path in sorted((out / "reports").glob("*.json")):
        if path.name == "summary.json":
            continue
        reports[path.stem] = json.loads(path.read_text())
    _write_json(out / "reports" / "summary.json", reports)
    for name, body in reports.items():
        keys = [k for k in ("l2_rel", "imag_ratio", "det_coverage",
                            "all_passed", "slope") if k in body]
        line = ", ".join(f"{k}={body[k]}" for k in keys) or "(details in file)"
        print(f"{name}: {line}")
    return 0


COMMANDS = {
    "forward": _cmd_forward,
    "measure": _cmd_measure,
    "reconstruct-q": _cmd_reconstruct_q,
    "reconstruct-b": _cmd_reconstruct_b,
    "eps-lab": _cmd_eps_lab,
    "verify": _cmd_verify,
    "report": _cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="schroinv",
        description="Forward simulation and coefficient reconstruction "
                    "experiments.")
    parser.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML experiment configuration")
    common.add_argument("--out", help="experiment directory (overrides "
                                      "config [output].dir)")
    common.add_argument("--threads", type=int, default=None,
                        help="bound the worker/BLAS pool; 1 forces the "
                             "reproducible sequential path")
    common.add_argument("--seed", type=int, default=None,
                        help="seed for randomized studies (overrides "
                             "config [output].seed)")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _limit_threads(args.threads)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg["output"]["seed"] = args.seed
        out = _prepare_outdir(args, cfg)
        return COMMANDS[args.command](args, cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - report the failing stage
        print(f"{args.command} failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
