"""Command-line interface: ``hctables compare|curve|simulate|phase-fit``.

Exit codes: 0 success, 2 usage, 3 I/O or degenerate input, 4 config,
5 numeric domain.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, DegenerateInputError, ParameterError, ShapeError, TableFormatError
from .hc_stats import HCConfig, hc_statistic, min_p_statistic
from .io import (
    align_tables,
    fmt,
    load_config,
    read_power_grid,
    read_table,
    write_csv,
    write_phase_fit,
    write_power_grid,
)
from .pvalues import estimate_allocation_prob, pvalue_vector
from .specfun import make_rng
from .simulate import empirical_transition, run_grid
from .theory import CURVES, curve_table

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_CONFIG, EXIT_DOMAIN = 0, 2, 3, 4, 5


class UsageError(Exception):
    pass


def _global_flags(p: argparse.ArgumentParser, suppress: bool) -> None:
    kw = {"default": argparse.SUPPRESS} if suppress else {}
    p.add_argument("--seed", type=int, help="master seed", **kw)
    p.add_argument("--out", help="output file (compare, curve, phase-fit) or directory (simulate)", **kw)
    p.add_argument("--format", choices=("json", "csv", "text"), help="report format", **kw)
    p.add_argument("--workers", type=int, help="worker processes for simulate (default: all cores)", **kw)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hctables", description="Higher Criticism comparison of frequency tables.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compare", help="compare two frequency tables")
    p.add_argument("file_x")
    p.add_argument("file_y")
    p.add_argument("--statistic", choices=("hc", "minp"), default="hc")
    p.add_argument("--gamma0", type=float, default=0.10)
    p.add_argument("--pvalue-mode", choices=("exact", "randomized", "normal"), default="exact")
    p.add_argument("--pprime", default="auto", help="allocation probability or 'auto'")
    p.add_argument("--top-k", type=int, default=10)
    _global_flags(p, suppress=True)

    p = sub.add_parser("curve", help="tabulate a phase-transition curve")
    p.add_argument("curve", choices=sorted(CURVES))
    p.add_argument("--start", type=float, default=0.5)
    p.add_argument("--stop", type=float, default=1.0)
    p.add_argument("--step", type=float, default=0.01)
    _global_flags(p, suppress=True)

    p = sub.add_parser("simulate", help="Monte-Carlo power grid from a config file")
    p.add_argument("config")
    _global_flags(p, suppress=True)

    p = sub.add_parser("phase-fit", help="logistic transition fit of a power grid CSV")
    p.add_argument("power_grid")
    _global_flags(p, suppress=True)
    return parser


def _emit(text: str, out) -> None:
    if out:
        Path(out).write_bytes(text.encode("utf-8"))
    else:
        sys.stdout.write(text)


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


# --- compare ---------------------------------------------------------------


def cmd_compare(args) -> int:
    cats, tables = align_tables(read_table(args.file_x), read_table(args.file_y))
    if not cats:
        raise DegenerateInputError("the union of categories is empty")
    if args.top_k < 0:
        raise UsageError("--top-k must be non-negative")
    p_hat = estimate_allocation_prob(tables)
    if args.pprime == "auto":
        pprime = p_hat
    else:
        try:
            pprime = float(args.pprime)
        except ValueError:
            raise UsageError(f"--pprime must be a number or 'auto', got {args.pprime!r}") from None
    seed = getattr(args, "seed", None)
    rng = make_rng(0 if seed is None else seed) if args.pvalue_mode == "randomized" else None
    pv = pvalue_vector(tables, args.pvalue_mode, pprime, rng)
    hc = hc_statistic(pv, HCConfig(args.gamma0))
    minp = min_p_statistic(pv)

    order = np.argsort(pv.values, kind="stable")
    n_sel = 0 if hc.degenerate else hc.argmax_index
    selected = [cats[i] for i in order[:n_sel]]
    top = [
        {"category": cats[i], "x": int(tables.x[i]), "y": int(tables.y[i]), "pvalue": float(pv.values[i])}
        for i in order[: args.top_k]
    ]
    report = {
        "statistic": args.statistic,
        "categories": len(cats),
        "pvalue_mode": args.pvalue_mode,
        "pprime": float(pprime),
        "pprime_estimate": float(p_hat),
        "hc": _jsonable(float(hc.value)),
        "hc_argmax": int(hc.argmax_index),
        "hc_threshold_pvalue": float(hc.threshold_pvalue),
        "hc_degenerate": bool(hc.degenerate),
        "min_p": float(minp),
        "selected": selected,
        "top": top,
    }

    fmt_name = getattr(args, "format", None) or "text"
    out = getattr(args, "out", None)
    if fmt_name == "json":
        _emit(json.dumps(report, indent=2) + "\n", out)
    elif fmt_name == "csv":
        rank = np.empty(len(cats), dtype=np.int64)
        rank[order] = np.arange(1, len(cats) + 1)
        rows = (
            (cats[i], int(tables.x[i]), int(tables.y[i]), float(pv.values[i]), int(rank[i]), bool(rank[i] <= n_sel))
            for i in range(len(cats))
        )
        if out:
            write_csv(out, ("category", "x", "y", "pvalue", "rank", "selected"), rows)
        else:
            write_csv(sys.stdout, ("category", "x", "y", "pvalue", "rank", "selected"), rows)
    else:
        lines = [
            f"categories        {len(cats)}",
            f"p-value mode      {args.pvalue_mode}",
            f"allocation p'     {fmt(float(pprime))} (estimate {fmt(float(p_hat))})",
            f"HC                {fmt(float(hc.value))}" + ("  [degenerate]" if hc.degenerate else ""),
            f"HC argmax rank    {hc.argmax_index}",
            f"HC threshold P    {fmt(float(hc.threshold_pvalue))}",
            f"min-P             {fmt(float(minp))}",
            f"selected          {len(selected)} categories",
            "",
            f"{'category':<20} {'x':>8} {'y':>8}  pvalue",
        ]
        lines += [f"{t['category']:<20} {t['x']:>8} {t['y']:>8}  {fmt(t['pvalue'])}" for t in top]
        _emit("\n".join(lines) + "\n", out)
    return EXIT_OK


# --- curve -----------------------------------------------------------------


def cmd_curve(args) -> int:
    if not args.step > 0:
        raise UsageError("--step must be positive")
    if args.start > args.stop:
        raise UsageError(f"--start {args.start} exceeds --stop {args.stop}")
    count = int(math.floor((args.stop - args.start) / args.step + 1e-9)) + 1
    betas = [round(args.start + i * args.step, 12) for i in range(count)]
    table = curve_table(args.curve, betas)
    out = getattr(args, "out", None)
    fmt_name = getattr(args, "format", None) or "csv"
    if fmt_name == "json":
        rows = [{"beta": float(b), "r": float(r)} for b, r in table]
        _emit(json.dumps({"curve": args.curve, "rows": rows}, indent=2) + "\n", out)
    else:
        write_csv(out or sys.stdout, ("beta", "r"), table.tolist())
    return EXIT_OK


# --- simulate / phase-fit --------------------------------------------------


def _workers(args) -> int:
    w = getattr(args, "workers", None)
    if w is None:
        return os.cpu_count() or 1
    if w < 1:
        raise UsageError("--workers must be at least 1")
    return w


def cmd_simulate(args) -> int:
    config = load_config(args.config)
    seed = getattr(args, "seed", None)
    if seed is not None:
        config.master_seed = seed
    out_dir = Path(getattr(args, "out", None) or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    grid, fits, meta = run_grid(config, _workers(args))
    write_power_grid(out_dir / "power_grid.csv", grid)
    write_phase_fit(out_dir / "phase_fit.csv", fits)
    meta["outputs"] = ["power_grid.csv", "phase_fit.csv"]
    meta["config_file"] = str(args.config)
    text = json.dumps(meta, indent=2, sort_keys=True, default=_jsonable) + "\n"
    (out_dir / "manifest.json").write_bytes(text.encode("utf-8"))
    return EXIT_OK


def cmd_phase_fit(args) -> int:
    grid = read_power_grid(args.power_grid)
    fits = empirical_transition(grid)
    write_phase_fit(getattr(args, "out", None) or sys.stdout, fits)
    return EXIT_OK


COMMANDS = {
    "compare": cmd_compare,
    "curve": cmd_curve,
    "simulate": cmd_simulate,
    "phase-fit": cmd_phase_fit,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"hctables: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TableFormatError, DegenerateInputError, OSError) as exc:
        print(f"hctables: {exc}", file=sys.stderr)
        return EXIT_IO
    except ConfigError as exc:
        print(f"hctables: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ParameterError, ShapeError) as exc:
        print(f"hctables: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
