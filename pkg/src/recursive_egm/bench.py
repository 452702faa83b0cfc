"""Benchmark sweeps: timing, iteration counts and Euler-error statistics.

Each ``run_*`` function returns a list of records and, when the run config
names an output directory, writes them as CSV and JSON. A cell that raises
is recorded with its error message and the sweep moves on.

Timing protocol: one discarded warm-up call (which also triggers JIT
compilation), then ``repeats`` timed calls; the median wall time is kept.
Cells run one after another so timings never share the CPU.
"""

from dataclasses import asdict, dataclass, field, fields
from functools import lru_cache
from pathlib import Path
import logging
import statistics
import time
import warnings

import numpy as np

from .baselines import solve_ti, solve_vfi
from .config import load_config, model_from_config
from .egm import solve_egm
from .evaluation import agent_uniforms, ergodic_errors, grid_errors, simulate
from .exceptions import ExistenceWarning
from .io import write_json, write_table

log = logging.getLogger(__name__)

METHODS = ("egm", "ti", "vfi")
RHO_VALUES = (0.5, 0.9, 1.1, 1.5, 2.0, 3.0)


@dataclass
class BenchmarkRecord:
    method: str
    mode: str
    howard_k: int
    n_grid: int
    time_ms: float = float("nan")
    policy_iters: int = 0
    converged: bool = False
    euler_mean_grid: float = float("nan")
    euler_max_grid: float = float("nan")
    euler_mean_ergodic: float = float("nan")
    euler_max_ergodic: float = float("nan")
    rho: float = float("nan")
    error: str = ""

    @property
    def label(self):
        return self.method if self.mode == "n/a" else f"{self.method}-{self.mode}"

    @property
    def ok(self):
        return not self.error


@dataclass
class EqualAccuracyRecord:
    vfi_n: int
    vfi_time_ms: float = float("nan")
    vfi_error: float = float("nan")
    egm_n: int = 0
    egm_time_ms: float = float("nan")
    egm_error: float = float("nan")
    speedup: float = float("nan")
    error: str = ""


@dataclass
class RunConfig:
    """Calibration plus sweep axes for one harness invocation."""

    calibration: dict = field(default_factory=load_config)
    methods: tuple = METHODS
    modes: tuple = ("fast", "accurate")
    egm_ks: tuple = (1, 2, 3, 4, 5)
    ti_ks: tuple = (1, 2, 3, 4, 5)
    vfi_ks: tuple = (1, 10, 20, 30, 40, 50)
    vfi_sizes: tuple = (50, 100, 150, 200, 300)
    egm_sizes: tuple = (10, 15, 20, 25, 30, 40, 50, 75, 100)
    pareto_sizes: tuple = (25, 50, 100, 200)
    rhos: tuple = RHO_VALUES
    seed: int = 0
    out_dir: Path = None
    repeats: int = 3
    n_agents: int = 10_000
    n_periods: int = 500
    burn_in: int = 200

    def __post_init__(self):
        if self.repeats < 1:
            raise ValueError("repeats must be at least 1")
        for name in ("methods", "modes", "egm_ks", "ti_ks", "vfi_ks", "vfi_sizes",
                     "egm_sizes", "rhos"):
            if not getattr(self, name):
                raise ValueError(f"sweep axis {name} is empty")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ValueError(f"unknown methods {sorted(unknown)}")
        if self.out_dir is not None:
            self.out_dir = Path(self.out_dir)
            self.out_dir.mkdir(parents=True, exist_ok=True)

    @property
    def n_grid(self):
        return self.calibration["n_m"]

    def model(self, n_grid=None, **param_changes):
        cfg = dict(self.calibration)
        if n_grid is not None:
            cfg["n_m"] = cfg["n_a"] = n_grid
        cfg.update(param_changes)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ExistenceWarning)
            return model_from_config(cfg)


def solve(model, method, mode="fast", howard_k=1, raise_on_fail=True):
    if method == "egm":
        return solve_egm(model, howard_k=howard_k, raise_on_fail=raise_on_fail)
    if method == "ti":
        return solve_ti(model, mode, howard_k=howard_k, raise_on_fail=raise_on_fail)
    if method == "vfi":
        return solve_vfi(model, mode, howard_k=howard_k, raise_on_fail=raise_on_fail)
    raise ValueError(f"unknown method {method!r}")


def time_call(fn, repeats=3):
    """Warm up once, time ``repeats`` calls; returns (last result, median ms)."""
    fn()
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        out = fn()
        times.append((time.perf_counter() - start) * 1e3)
    return out, statistics.median(times)


@lru_cache(maxsize=4)
def _uniforms(seed, n_agents, n_periods):
    u = agent_uniforms(seed, n_agents, n_periods)
    u.setflags(write=False)
    return u


def evaluate_into(record, solution, model, cfg, ergodic=True):
    g = grid_errors(solution, model)
    record.euler_mean_grid, record.euler_max_grid = g.mean_l1, g.max_linf
    if ergodic:
        u = _uniforms(cfg.seed, cfg.n_agents, cfg.n_periods)
        panel = simulate(solution, model, cfg.n_agents, cfg.n_periods, cfg.burn_in,
                         cfg.seed, uniforms=u)
        e = ergodic_errors(solution, model, panel)
        record.euler_mean_ergodic, record.euler_max_ergodic = e.mean_l1, e.max_linf


def run_cell(cfg, method, mode="n/a", howard_k=1, n_grid=None, ergodic=True,
             timed=True, **param_changes):
    """Solve, time and evaluate one configuration; never raises."""
    mode = "n/a" if method == "egm" else mode
    n = cfg.n_grid if n_grid is None else n_grid
    rec = BenchmarkRecord(method=method, mode=mode, howard_k=howard_k, n_grid=n,
                          rho=param_changes.get("rho", cfg.calibration["rho"]))
    try:
        model = cfg.model(n, **param_changes)
        call = lambda: solve(model, method, mode, howard_k)
        if timed:
            sol, rec.time_ms = time_call(call, cfg.repeats)
        else:
            sol = call()
            rec.time_ms = sol.solve_seconds * 1e3
        rec.policy_iters = sol.iters
        rec.converged = sol.converged
        evaluate_into(rec, sol, model, cfg, ergodic)
    except Exception as exc:  # recorded, sweep continues
        rec.error = f"{type(exc).__name__}: {exc}"
        log.warning("cell %s K=%d n=%d failed: %s", rec.label, howard_k, n, rec.error)
    return rec


def _emit(cfg, name, records):
    if cfg.out_dir is None:
        return
    rows = [asdict(r) for r in records]
    write_table(rows, cfg.out_dir / f"{name}.csv",
                columns=[f.name for f in fields(type(records[0]))] if records else None)
    write_json(rows, cfg.out_dir / f"{name}.json")


def run_speed_table(cfg):
    """EGM, TI-fast and VFI-fast at the configured grid, sorted by time."""
    k = cfg.calibration["howard_k"]
    cells = [("egm", "n/a"), ("ti", "fast"), ("vfi", "fast")]
    recs = [run_cell(cfg, m, mode, k) for m, mode in cells if m in cfg.methods]
    recs.sort(key=lambda r: (np.isnan(r.time_ms), r.time_ms))
    _emit(cfg, "speed_table", recs)
    return recs


def run_accuracy_table(cfg):
    """EGM against the accurate-mode baselines."""
    k = cfg.calibration["howard_k"]
    cells = [("egm", "n/a"), ("ti", "accurate"), ("vfi", "accurate")]
    recs = [run_cell(cfg, m, mode, k) for m, mode in cells if m in cfg.methods]
    _emit(cfg, "accuracy_table", recs)
    return recs


def run_howard_sweep(cfg, ergodic=False):
    recs = []
    if "egm" in cfg.methods:
        recs += [run_cell(cfg, "egm", "n/a", k, ergodic=ergodic) for k in cfg.egm_ks]
    for method, ks in (("ti", cfg.ti_ks), ("vfi", cfg.vfi_ks)):
        if method not in cfg.methods:
            continue
        for mode in cfg.modes:
            recs += [run_cell(cfg, method, mode, k, ergodic=ergodic) for k in ks]
    _emit(cfg, "howard_sweep", recs)
    return recs


def run_equal_accuracy(cfg):
    """Smallest EGM grid matching VFI-fast's mean grid error, per VFI grid size."""
    egm_cache = {}

    def egm_at(n):
        if n not in egm_cache:
            egm_cache[n] = run_cell(cfg, "egm", n_grid=n, ergodic=False)
        return egm_cache[n]

    out = []
    for n_vfi in cfg.vfi_sizes:
        rec = EqualAccuracyRecord(vfi_n=n_vfi)
        vfi = run_cell(cfg, "vfi", "fast", 1, n_grid=n_vfi, ergodic=False)
        rec.vfi_time_ms, rec.vfi_error = vfi.time_ms, vfi.euler_mean_grid
        if not vfi.ok:
            rec.error = vfi.error
            out.append(rec)
            continue
        for n_egm in sorted(cfg.egm_sizes):
            e = egm_at(n_egm)
            if e.ok and e.euler_mean_grid <= vfi.euler_mean_grid:
                rec.egm_n, rec.egm_time_ms, rec.egm_error = n_egm, e.time_ms, e.euler_mean_grid
                rec.speedup = vfi.time_ms / e.time_ms
                break
        else:
            rec.error = "no EGM grid size in the sweep reaches the VFI error"
        out.append(rec)
    _emit(cfg, "equal_accuracy", out)
    return out


def run_rho_sweep(cfg):
    """EGM across inverse-EIS values with risk aversion held fixed."""
    recs = []
    k = cfg.calibration["howard_k"]
    for rho in cfg.rhos:
        rec = run_cell(cfg, "egm", "n/a", k, rho=float(rho))
        if rec.ok and not rec.converged:
            rec.error = "did not converge"
        recs.append(rec)
    _emit(cfg, "rho_sweep", recs)
    return recs


def policy_rows(solution):
    n_z = solution.n_states
    return [{"m": float(m), **{f"c_z{k}": float(solution.c[i, k]) for k in range(n_z)}}
            for i, m in enumerate(solution.m_grid)]


def pareto_rows(records):
    return [{"method": r.method, "mode": r.mode, "n_grid": r.n_grid, "time_ms": r.time_ms,
             "euler_mean_grid": r.euler_mean_grid,
             "euler_mean_ergodic": r.euler_mean_ergodic, "error": r.error}
            for r in records]


def tradeoff_rows(records):
    by_key = {(r.method, r.mode): r for r in records}
    rows = []
    for method in ("ti", "vfi"):
        fast, acc = by_key.get((method, "fast")), by_key.get((method, "accurate"))
        if fast is None or acc is None:
            continue
        rows.append({"method": method,
                     "fast_time_ms": fast.time_ms, "fast_euler_mean": fast.euler_mean_ergodic,
                     "accurate_time_ms": acc.time_ms,
                     "accurate_euler_mean": acc.euler_mean_ergodic})
    return rows


def emit_figure_data(which, out_dir, records=None, solution=None):
    """Write plot-ready CSV for one figure: ``policy``, ``pareto`` or ``tradeoff``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if which == "policy":
        if solution is None:
            raise ValueError("policy figure needs a solution")
        rows = policy_rows(solution)
    elif which == "pareto":
        rows = pareto_rows(records or [])
    elif which == "tradeoff":
        rows = tradeoff_rows(records or [])
    else:
        raise ValueError(f"unknown figure {which!r}")
    return write_table(rows, out_dir / f"figure_{which}.csv")


def run_figures(cfg):
    """Solve what each figure needs and emit all three data files."""
    out = cfg.out_dir or Path(".")
    paths = []
    model = cfg.model()
    paths.append(emit_figure_data("policy", out, solution=solve_egm(model)))
    pareto = [run_cell(cfg, m, mode, 1, n_grid=n, ergodic=False)
              for n in cfg.pareto_sizes
              for m, mode in (("egm", "n/a"), ("ti", "fast"), ("vfi", "fast"))]
    paths.append(emit_figure_data("pareto", out, records=pareto))
    trade = [run_cell(cfg, m, mode, 1) for m in ("ti", "vfi") for mode in ("fast", "accurate")]
    paths.append(emit_figure_data("tradeoff", out, records=trade))
    return paths


# -- assertions enabled by --check -------------------------------------------

@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str


def _find(records, method, mode="n/a", k=None):
    for r in records:
        if r.method == method and r.mode == mode and (k is None or r.howard_k == k) and r.ok:
            return r
    return None


def check_speed(records):
    egm, ti, vfi = (_find(records, "egm"), _find(records, "ti", "fast"),
                    _find(records, "vfi", "fast"))
    if not (egm and ti and vfi):
        return [Check("speed table complete", False, "missing or failed cells")]
    return [
        Check("time ordering EGM < TI-fast < VFI-fast",
              egm.time_ms < ti.time_ms < vfi.time_ms,
              f"{egm.time_ms:.1f} / {ti.time_ms:.1f} / {vfi.time_ms:.1f} ms"),
        Check("VFI-fast / EGM >= 20", vfi.time_ms / egm.time_ms >= 20,
              f"{vfi.time_ms / egm.time_ms:.1f}x"),
        Check("TI-fast / EGM >= 4", ti.time_ms / egm.time_ms >= 4,
              f"{ti.time_ms / egm.time_ms:.1f}x"),
    ]


def check_accuracy(records):
    egm, ti, vfi = (_find(records, "egm"), _find(records, "ti", "accurate"),
                    _find(records, "vfi", "accurate"))
    if not (egm and ti and vfi):
        return [Check("accuracy table complete", False, "missing or failed cells")]
    gap = abs(ti.euler_mean_ergodic - egm.euler_mean_ergodic)
    return [
        Check("TI-accurate / EGM >= 30", ti.time_ms / egm.time_ms >= 30,
              f"{ti.time_ms / egm.time_ms:.1f}x"),
        Check("VFI-accurate / TI-accurate >= 2", vfi.time_ms / ti.time_ms >= 2,
              f"{vfi.time_ms / ti.time_ms:.2f}x"),
        Check("TI-accurate mean error within 0.3 of EGM", gap <= 0.3, f"gap {gap:.3f}"),
    ]


def check_howard(records):
    out = []
    egm = {r.howard_k: r.time_ms for r in records if r.method == "egm" and r.ok}
    if egm:
        best = min(egm, key=egm.get)
        out.append(Check("EGM fastest at K=1", best == 1, f"best K={best}"))
    vfi = {r.howard_k: r.time_ms for r in records
           if r.method == "vfi" and r.mode == "fast" and r.ok}
    if 1 in vfi and any(k >= 20 for k in vfi):
        best = min(t for k, t in vfi.items() if 20 <= k <= 50)
        out.append(Check("VFI-fast best K in 20..50 at most half of K=1",
                         best <= 0.5 * vfi[1], f"{best:.0f} vs {vfi[1]:.0f} ms"))
    ti = {r.howard_k: r.time_ms for r in records
          if r.method == "ti" and r.mode == "fast" and r.ok}
    if 1 in ti and 3 in ti and 4 in ti:
        out.append(Check("TI-fast at K=3,4 no slower than K=1",
                         max(ti[3], ti[4]) <= ti[1],
                         f"{ti[3]:.0f}, {ti[4]:.0f} vs {ti[1]:.0f} ms"))
    return out or [Check("howard sweep complete", False, "no usable cells")]


def check_equal_accuracy(records):
    rec = next((r for r in records if r.vfi_n == 100), None)
    if rec is None or rec.error:
        return [Check("equal accuracy at VFI n=100", False, rec.error if rec else "missing")]
    return [Check("EGM n<=25 matches VFI n=100 with speedup >= 50",
                  rec.egm_n <= 25 and rec.speedup >= 50,
                  f"EGM n={rec.egm_n}, speedup {rec.speedup:.0f}x")]


def check_rho(records):
    bad = [r for r in records if not r.ok or not r.converged
           or not r.euler_mean_ergodic <= -4.0]
    return [Check("all rho converge with mean error <= -4", not bad and bool(records),
                  ", ".join(f"rho={r.rho:g}: "
                            + (r.error or f"{r.euler_mean_ergodic:.2f}")
                            for r in records))]
