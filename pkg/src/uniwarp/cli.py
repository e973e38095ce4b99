"""Command-line front end.

Subcommands::

    uniwarp solve        compute the potential and forward field
    uniwarp reconstruct  warp a uniform lattice back into a density
    uniwarp eval         Bhattacharyya score of two density grids
    uniwarp plot         contours, arrow tables, and PGM previews
    uniwarp sample       draw points from a solved field

Exit codes: 0 success, 2 parse/config errors, 3 solver failures, 4 I/O
errors.  All outputs are written atomically; a failing command leaves no
partial files.  Given identical inputs, config, and seed, the grid,
field, and sample outputs are byte-identical across runs.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import fileio, viz
from .fileio import FileFormatError
from .grid import DensityError, ScalarGrid
from .multigrid import PyramidConfig, SolveReport, solve
from .optimizer import NcgConfig
from .pde import WindowError, WindowSpec
from .reference import BUILTIN_KINDS, TestDistributionSpec, evaluator, generate
from .transport import (FieldInversionError, FoldedCellError, TransportMap,
                        bhattacharyya, boundary_normal_residual, draw_samples,
                        field_from_components, forward_field,
                        jacobian_positive_fraction, reconstruct_density)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_IO = 4


class ConfigError(ValueError):
    pass


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="uniwarp",
                                 description="Uniformizing transport of 2-D densities")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("solve", help="solve for the potential of a density")
    sp.add_argument("--config", type=Path, default=None)
    sp.add_argument("--out", type=Path, default=Path("."))
    sp.add_argument("--builtin", choices=BUILTIN_KINDS, default=None)
    sp.add_argument("--source", type=Path, default=None, help="input density grid file")
    sp.add_argument("--size", type=int, default=None, help="final lattice size")
    sp.add_argument("--seed", type=int, default=0)

    rp = sub.add_parser("reconstruct", help="density estimate from a field file")
    rp.add_argument("field", type=Path)
    rp.add_argument("--out", type=Path, default=Path("."))
    rp.add_argument("--shape", type=int, default=None, help="output lattice size")

    ep = sub.add_parser("eval", help="Bhattacharyya score of two grids")
    ep.add_argument("p", type=Path)
    ep.add_argument("phat", type=Path)

    pp = sub.add_parser("plot", help="contours / arrows / preview files")
    pp.add_argument("--grid", type=Path, default=None)
    pp.add_argument("--field", type=Path, default=None)
    pp.add_argument("--out", type=Path, default=Path("."))

    mp = sub.add_parser("sample", help="draw samples through the inverse map")
    mp.add_argument("field", type=Path)
    mp.add_argument("-n", type=int, default=1000)
    mp.add_argument("--seed", type=int, default=0)
    mp.add_argument("--out", type=Path, default=Path("."))
    return ap


def _get(cfg: dict, key: str, conv, default):
    if key not in cfg:
        return default
    try:
        return conv(cfg[key])
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {cfg[key]!r}") from exc


def _bool(s: str) -> bool:
    if s.lower() in ("1", "true", "yes", "on"):
        return True
    if s.lower() in ("0", "false", "no", "off"):
        return False
    raise ValueError(s)


def _configs_from_dict(cfg: dict):
    levels = _get(cfg, "pyramid.levels", int, 4)
    base = _get(cfg, "pyramid.base_size", int, 44)
    target = _get(cfg, "pyramid.target_size", int, 351)
    try:
        pcfg = PyramidConfig(base_size=base, levels=levels, target_size=target)
        ncfg = NcgConfig(
            max_line_searches=_get(cfg, "ncg.max_line_searches", int, 1000),
            wolfe_c1=_get(cfg, "ncg.wolfe_c1", float, 0.01),
            wolfe_c2=_get(cfg, "ncg.wolfe_c2", float, 0.5),
            max_evals_per_search=_get(cfg, "ncg.max_evals_per_search", int, 20),
            grad_tol=_get(cfg, "ncg.grad_tol", float, 1e-9),
        )
        window = WindowSpec(
            pad=_get(cfg, "window.pad", int, None),
            transition=_get(cfg, "window.transition", int, 12),
            shape=_get(cfg, "window.shape", str, "radial"),
        )
    except (ValueError, WindowError) as exc:
        raise ConfigError(str(exc)) from exc
    return pcfg, ncfg, window


def _pyramid_for_size(pcfg: PyramidConfig, size: int) -> PyramidConfig:
    """Adjust the pyramid so the final crop lands on ``size``."""
    base = size // (pcfg.growth ** (pcfg.levels - 1))
    if base * pcfg.growth ** (pcfg.levels - 1) < size:
        base += 1
    base = max(base, 15)
    return PyramidConfig(base_size=base, levels=pcfg.levels, target_size=size)


def _cmd_solve(args) -> int:
    cfg = fileio.read_config(args.config) if args.config else {}
    pcfg, ncfg, window = _configs_from_dict(cfg)
    builtin = args.builtin or cfg.get("builtin")
    source_path = args.source or cfg.get("source")
    if builtin and source_path:
        raise ConfigError("give either a builtin or a source grid, not both")
    if not builtin and not source_path:
        raise ConfigError("no density source (use --builtin or --source)")
    if builtin:
        if builtin not in BUILTIN_KINDS:
            raise ConfigError(f"unknown builtin {builtin!r}")
        source = evaluator(TestDistributionSpec(builtin))
    else:
        source = fileio.read_grid(source_path)
    if args.size is not None:
        pcfg = _pyramid_for_size(pcfg, args.size)
        if isinstance(source, ScalarGrid) and min(source.shape) < pcfg.base_size:
            raise ConfigError("source grid smaller than the coarsest level")

    g, report = solve(source, pcfg, ncfg, window)

    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    fileio.write_grid(out / "g.grid", g)
    fileio.write_field(out / "field.field", report.final_field)
    fileio.atomic_write_text(out / "report.json", _report_json(report))
    return EXIT_OK


def _report_json(report: SolveReport) -> str:
    field = report.final_field
    tmap = field_from_components(field.dx, field.dy)
    doc = {
        "levels": [
            {
                "level": lv.level_index,
                "size": lv.size,
                "pad": lv.pad,
                "line_searches": lv.trace.line_searches_used,
                "terminated_by": lv.trace.terminated_by,
                "immediate_convergence": lv.trace.line_searches_used == 0,
                "energy_initial": lv.trace.energies[0],
                "energy_final": lv.trace.energies[-1],
                "energy_valid_region": lv.energy_valid,
                "rho_sq_valid_region": lv.rho_sq_valid,
                "wall_time_s": lv.wall_time,
            }
            for lv in report.levels
        ],
        "total_time_s": report.total_time,
        "boundary_normal_residual": boundary_normal_residual(tmap),
        "jacobian_positive_fraction": float(np.mean(report.final_det.data > 0.0)),
    }
    return json.dumps(doc, indent=2) + "\n"


def _cmd_reconstruct(args) -> int:
    field = fileio.read_field(args.field)
    tmap = field_from_components(field.dx, field.dy)
    n = args.shape if args.shape else field.height
    phat = reconstruct_density(tmap, (n, n))
    args.out.mkdir(parents=True, exist_ok=True)
    fileio.write_grid(args.out / "phat.grid", phat)
    return EXIT_OK


def _cmd_eval(args) -> int:
    p = fileio.read_grid(args.p)
    phat = fileio.read_grid(args.phat)
    if p.shape != phat.shape:
        raise FileFormatError(f"shape mismatch: {p.shape} vs {phat.shape}")
    beta = bhattacharyya(p, phat)
    print(f"beta={beta:.6f}")
    print(f"one_minus_beta={1.0 - beta:.6f}")
    return EXIT_OK


def _cmd_plot(args) -> int:
    if args.grid is None and args.field is None:
        raise ConfigError("plot needs --grid and/or --field")
    args.out.mkdir(parents=True, exist_ok=True)
    if args.grid is not None:
        grid = fileio.read_grid(args.grid)
        fileio.atomic_write_text(args.out / "contours.csv", viz.contours_csv(grid))
        fileio.atomic_write_bytes(args.out / "preview.pgm", viz.grid_to_pgm(grid))
    if args.field is not None:
        field = fileio.read_field(args.field)
        fileio.atomic_write_text(args.out / "field_arrows.csv",
                                 viz.field_arrows_csv(field))
    return EXIT_OK


def _cmd_sample(args) -> int:
    field = fileio.read_field(args.field)
    tmap = field_from_components(field.dx, field.dy)
    pts = draw_samples(tmap, args.n, args.seed)
    rows = ["x,y"] + [f"{x:.17g},{y:.17g}" for x, y in pts]
    args.out.mkdir(parents=True, exist_ok=True)
    fileio.atomic_write_text(args.out / "points.csv", "\n".join(rows) + "\n")
    return EXIT_OK


_COMMANDS = {
    "solve": _cmd_solve,
    "reconstruct": _cmd_reconstruct,
    "eval": _cmd_eval,
    "plot": _cmd_plot,
    "sample": _cmd_sample,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, FileFormatError, DensityError, WindowError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FieldInversionError, FoldedCellError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        if getattr(exc, "mask", None) is not None:
            ys, xs = np.nonzero(exc.mask)
            for y, x in list(zip(ys, xs))[:20]:
                print(f"  fold/divergence near (x={x}, y={y})", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
