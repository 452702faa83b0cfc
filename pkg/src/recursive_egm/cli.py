"""Command-line entry point: ``recursive-egm <subcommand> [flags]``."""

import argparse
from dataclasses import asdict
import logging
import math
from pathlib import Path
import sys

from . import bench
from .config import ConfigError, load_config
from .evaluation import ergodic_errors, grid_errors, simulate
from .io import save_solution, write_json

SWEEPS = {
    "speed-table": (bench.run_speed_table, bench.check_speed),
    "accuracy-table": (bench.run_accuracy_table, bench.check_accuracy),
    "howard-sweep": (bench.run_howard_sweep, bench.check_howard),
    "equal-accuracy": (bench.run_equal_accuracy, bench.check_equal_accuracy),
    "rho-sweep": (bench.run_rho_sweep, bench.check_rho),
}


def _common(p):
    p.add_argument("--config", type=Path, help="flat key-value calibration file")
    p.add_argument("--seed", type=int, help="simulation seed")
    p.add_argument("--out", type=Path, default=Path("results"), help="output directory")
    p.add_argument("--repeats", type=int, default=3, help="timed repeats per cell")
    p.add_argument("--method", action="append", choices=bench.METHODS,
                   help="restrict to a method (repeatable)")
    p.add_argument("--mode", action="append", choices=("fast", "accurate"),
                   help="restrict baseline modes (repeatable)")
    p.add_argument("--howard-k", type=int, help="Howard steps per policy update")
    p.add_argument("--grid-size", type=int, help="points in the m and a grids")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="recursive-egm",
        description="Epstein-Zin consumption-savings solvers and benchmarks.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve once and dump the solution")
    _common(p)
    p.add_argument("--no-ergodic", action="store_true", help="skip simulation errors")

    for name in SWEEPS:
        p = sub.add_parser(name, help=f"run the {name.replace('-', ' ')}")
        _common(p)
        p.add_argument("--check", action="store_true",
                       help="assert the benchmark claims; nonzero exit on failure")

    p = sub.add_parser("figures", help="emit plot-ready figure data")
    _common(p)
    p = sub.add_parser("check", help="run every benchmark assertion")
    _common(p)
    return parser


def _run_config(args, **axes):
    cal = load_config(args.config, seed=args.seed, howard_k=args.howard_k,
                      n_m=args.grid_size, n_a=args.grid_size)
    if args.method:
        axes["methods"] = tuple(args.method)
    if args.mode:
        axes["modes"] = tuple(args.mode)
    return bench.RunConfig(calibration=cal, seed=cal["seed"], out_dir=args.out,
                           repeats=args.repeats, **axes)


def _fmt(x):
    if isinstance(x, float):
        return "nan" if math.isnan(x) else f"{x:.4g}"
    return str(x)


def print_table(records, out=None):
    out = out or sys.stdout
    rows = [asdict(r) for r in records]
    if not rows:
        print("(no rows)", file=out)
        return
    cols = [c for c in rows[0] if any(_fmt(r[c]) not in ("", "nan") for r in rows)]
    cells = [[_fmt(r[c]) for c in cols] for r in rows]
    widths = [max(len(c), *(len(row[i]) for row in cells)) for i, c in enumerate(cols)]
    print("  ".join(c.ljust(w) for c, w in zip(cols, widths)), file=out)
    for row in cells:
        print("  ".join(v.ljust(w) for v, w in zip(row, widths)), file=out)


def report_checks(checks, out=None):
    out = out or sys.stdout
    for c in checks:
        print(f"[{'PASS' if c.passed else 'FAIL'}] {c.name}: {c.detail}", file=out)
    return all(c.passed for c in checks)


def cmd_solve(args):
    cfg = _run_config(args)
    method = (args.method or ["egm"])[0]
    mode = "n/a" if method == "egm" else (args.mode or ["fast"])[0]
    model = cfg.model()
    sol, time_ms = bench.time_call(
        lambda: bench.solve(model, method, mode, cfg.calibration["howard_k"]), cfg.repeats)
    label = method if mode == "n/a" else f"{method}-{mode}"
    record = {"method": method, "mode": mode, "howard_k": sol.howard_k,
              "n_grid": int(model.m_grid.size), "policy_iters": sol.iters,
              "converged": sol.converged, "time_ms": time_ms,
              "grid_errors": grid_errors(sol, model).to_dict()}
    if not args.no_ergodic:
        panel = simulate(sol, model, seed=cfg.seed)
        record["ergodic_errors"] = ergodic_errors(sol, model, panel).to_dict()
    save_solution(sol, cfg.out_dir / f"solution_{label}.csv")
    write_json(record, cfg.out_dir / f"solve_{label}.json")
    g = record["grid_errors"]
    print(f"{label}: {sol.iters} iterations, {record['time_ms']:.1f} ms, "
          f"grid Euler error mean {g['mean_l1']:.2f} max {g['max_linf']:.2f}")
    if "ergodic_errors" in record:
        e = record["ergodic_errors"]
        print(f"ergodic Euler error mean {e['mean_l1']:.2f} max {e['max_linf']:.2f}")
    print(f"wrote {cfg.out_dir}")
    return 0


def cmd_sweep(args):
    run, check = SWEEPS[args.command]
    records = run(_run_config(args))
    print_table(records)
    if args.check:
        return 0 if report_checks(check(records)) else 1
    return 0


def cmd_figures(args):
    for path in bench.run_figures(_run_config(args)):
        print(f"wrote {path}")
    return 0


def cmd_check(args):
    """Every assertion, on sweeps trimmed to the cells the assertions read."""
    checks = []
    cfg = _run_config(args)
    checks += bench.check_speed(bench.run_speed_table(cfg))
    checks += bench.check_accuracy(bench.run_accuracy_table(cfg))
    howard_cfg = _run_config(args, modes=("fast",), ti_ks=(1, 3, 4),
                             vfi_ks=(1, 20, 30, 40, 50))
    checks += bench.check_howard(bench.run_howard_sweep(howard_cfg))
    eq_cfg = _run_config(args, vfi_sizes=(100,))
    checks += bench.check_equal_accuracy(bench.run_equal_accuracy(eq_cfg))
    checks += bench.check_rho(bench.run_rho_sweep(cfg))
    return 0 if report_checks(checks) else 1


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"solve": cmd_solve, "figures": cmd_figures, "check": cmd_check}
    try:
        return handler.get(args.command, cmd_sweep)(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
