"""Command-line front end.

    gaussdelay {mean,cov,optimal-path,escape,simulate} --config run.toml --out results/

Exit codes: 0 success, 2 configuration or input error, 3 numerical failure.
Every run writes ``run_record.json`` to the output directory.
"""
import argparse
from contextlib import contextmanager
import json
import logging
import math
import os
import sys
import time

import numpy as np

from . import __version__, export, plotting
from .config import load_config
from .delay_model import build_grid
from .errors import ConfigError, NumericalError, ParameterError
from .escape import EscapeProblem, escape_optimize
from .montecarlo import (
    SimulationConfig,
    estimate_moments,
    exit_direction_mode,
    exit_statistics,
    simulate_linear,
    simulate_nonlinear,
)
from .rate_functional import optimal_path
from .steps_solver import (
    solve_F,
    solve_covariance_column,
    solve_covariance_diagonal,
    solve_mean,
    solve_mean_analytic,
)

log = logging.getLogger("gaussdelay")

COMMANDS = ("mean", "cov", "optimal-path", "escape", "simulate")


class _Collector(logging.Handler):
    def __init__(self):
        super().__init__(logging.WARNING)
        self.messages = []

    def emit(self, record):
        self.messages.append(record.getMessage())


class Run:
    """Per-invocation state: output directory, timings, manifest and summary values."""

    def __init__(self, out, svg=False, threads=1, seed=None):
        self.out = out
        self.svg = svg
        self.threads = threads
        self.seed = seed
        self.timings = {}
        self.outputs = []
        self.results = {}

    def path(self, name):
        p = os.path.join(self.out, name)
        self.outputs.append(name)
        return p

    def figure(self, fn, name, *args, **kwargs):
        files = fn(os.path.join(self.out, name), *args, svg=self.svg, **kwargs)
        self.outputs += [os.path.basename(f) for f in files]

    @contextmanager
    def stage(self, name):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.timings[name] = round(time.perf_counter() - t0, 6)


def _block_value(block, key, where, default=None, kind=float):
    if key not in block:
        if default is None:
            raise ConfigError(f"missing required key '{where}.{key}'", f"{where}.{key}")
        return default
    val = block[key]
    try:
        if kind is int:
            if isinstance(val, bool) or int(val) != val:
                raise ValueError
            return int(val)
        if kind is bool:
            if not isinstance(val, bool):
                raise ValueError
            return val
        if kind is str:
            if not isinstance(val, str):
                raise ValueError
            return val
        if kind == "vector":
            arr = np.asarray(val, dtype=float)
            if arr.ndim != 1:
                raise ValueError
            return arr
        out = float(val)
        if math.isnan(out):
            raise ValueError
        return out
    except (TypeError, ValueError):
        raise ConfigError(f"'{where}.{key}' has an invalid value {val!r}", f"{where}.{key}") from None


def _grid_index(grid, T, label):
    j = grid.nearest_index(T)
    if abs(j * grid.delta - T) > 1e-9 * max(1.0, T):
        log.warning("%s=%g is not a grid time; using %.17g", label, T, j * grid.delta)
    return j


def cmd_mean(cfg, run):
    g = cfg.block("grid")
    grid = build_grid(cfg.model.tau, _block_value(g, "T", "grid"), _block_value(g, "N", "grid", kind=int))
    with run.stage("solve_mean"):
        mean = solve_mean(cfg.model, cfg.history, grid)
    export.write_trajectory(run.path("mean.csv"), grid.points, mean.values)
    run.results["m_end"] = mean.values[-1].tolist()
    if _block_value(g, "analytic_check", "grid", default=False, kind=bool):
        with run.stage("solve_mean_analytic"):
            exact = solve_mean_analytic(cfg.model, cfg.history, grid)
        export.write_trajectory(run.path("mean_analytic.csv"), grid.points, exact.values)
        run.results["analytic_sup_gap"] = float(np.abs(exact.values - mean.values).max())
    with run.stage("plot"):
        run.figure(plotting.plot_mean, "mean", grid.points, mean.values)


def _covariance(cfg, grid):
    F = solve_F(cfg.model, grid)
    return F, solve_covariance_diagonal(cfg.model, F, grid)


def cmd_cov(cfg, run):
    g = cfg.block("grid")
    T = _block_value(g, "T", "grid")
    grid = build_grid(cfg.model.tau, T, _block_value(g, "N", "grid", kind=int))
    with run.stage("solve_covariance_diagonal"):
        _, diag = _covariance(cfg, grid)
    curve = diag.min_inverse_eigenvalue()
    export.write_cov_diagonal(run.path("cov_diag.csv"), grid.points, diag.values)
    export.write_eigcurve(run.path("eigcurve.csv"), grid.points, curve)
    j = grid.horizon_index(T)
    run.results["variances_at_T"] = diag.variances()[j].tolist()
    run.results["min_eig_rho_inv_at_T"] = float(curve[j])
    with run.stage("plot"):
        run.figure(plotting.plot_variances, "variances", grid.points, diag.variances())
        run.figure(plotting.plot_eigcurve, "eigcurve", grid.points, curve)


def cmd_optimal_path(cfg, run):
    b = cfg.block("optimal_path")
    T = _block_value(b, "T", "optimal_path")
    N = _block_value(b, "N", "optimal_path", default=cfg.block("grid").get("N", 500), kind=int)
    Q = cfg.to_local(_block_value(b, "Q", "optimal_path", kind="vector"))
    if Q.shape != (cfg.model.dim,):
        raise ConfigError(f"optimal_path.Q must have {cfg.model.dim} entries", "optimal_path.Q")
    grid = build_grid(cfg.model.tau, T, N)
    j = _grid_index(grid, T, "optimal_path.T")
    with run.stage("solve"):
        mean = solve_mean(cfg.model, cfg.history, grid)
        F, diag = _covariance(cfg, grid)
        column = solve_covariance_column(cfg.model, F, j * grid.delta)
        tp = optimal_path(mean, column, diag.values[j], Q)
    export.write_trajectory(run.path("path.csv"), tp.path.times, tp.path.values, prefix="h")
    with open(run.path("energy.txt"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"T = {tp.T:.17g}\nenergy = {tp.energy:.17g}\n")
    run.results.update(T=tp.T, energy=tp.energy)
    if cfg.model.dim == 2:
        with run.stage("plot"):
            run.figure(plotting.plot_path, "path", tp.path.values, mean=mean.values[: j + 1])


def _vec(v):
    return "(" + ", ".join(f"{x:.10g}" for x in v) + ")"


def cmd_escape(cfg, run):
    b = cfg.block("escape")
    # the disk is centred on the stationary state (the local origin) unless given
    if "center" in b:
        center = cfg.to_local(_block_value(b, "center", "escape", kind="vector"))
    else:
        center = np.zeros(cfg.model.dim)
    problem = EscapeProblem(
        tuple(center),
        _block_value(b, "R", "escape"),
        _block_value(b, "delta_r", "escape"),
        _block_value(b, "T_large", "escape"),
        _block_value(b, "N", "escape", default=500, kind=int),
        _block_value(b, "half", "escape", default="both", kind=str),
    )
    with run.stage("escape_optimize"):
        sol = escape_optimize(cfg.model, cfg.history, problem)
    m = sol.matrix
    # the first rows have rho exactly zero by construction; only report real exclusions
    nonzero = np.any(sol.diagonal.values[: len(m.times)] != 0, axis=(1, 2))
    n_excl = int((m.excluded & nonzero).sum())
    if n_excl:
        log.warning("%d scanned times excluded as ill-conditioned", n_excl)
    with run.stage("write"):
        export.write_energy_matrix(run.path("energy_matrix.csv"), m.times, m.values)
        export.write_points(run.path("boundary_points.csv"), m.points)
        export.write_energy_scan(run.path("energy_scan.csv"), m.times, m.values, m.points)
    export.write_trajectory(run.path("escape_path.csv"), sol.path.path.times, sol.path.path.values, prefix="h")
    q_abs = sol.q_hat + cfg.origin
    lines = [
        f"T_opt = {'inf' if sol.at_horizon else format(sol.T_opt, '.10g')}",
        f"T_scan_min = {sol.T_index * sol.mean.grid.delta:.10g}",
        f"energy = {sol.energy:.10g}",
        f"q_hat_local = {_vec(sol.q_hat)}",
        f"q_hat_absolute = {_vec(q_abs)}",
        f"half = {problem.half}",
        f"excluded_times = {n_excl}",
        f"stationary_state = {_vec(cfg.origin)}",
    ]
    with open(run.path("summary.txt"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    run.results.update(
        T_opt=None if sol.at_horizon else sol.T_opt,
        T_opt_infinite=sol.at_horizon,
        energy=sol.energy,
        q_hat_local=sol.q_hat.tolist(),
        q_hat_absolute=q_abs.tolist(),
    )
    with run.stage("plot"):
        row_min = np.nanmin(np.where(np.isnan(m.values), np.inf, m.values), axis=1)
        ok = np.isfinite(row_min) & (m.times > 0)
        run.figure(plotting.plot_energy_scan, "energy_scan", m.times[ok], row_min[ok], T_opt=sol.T_opt)
        run.figure(plotting.plot_path, "escape_path", sol.path.path.values,
                   disk=(center, problem.R), mean=sol.mean.values[: sol.T_index + 1])


def cmd_simulate(cfg, run):
    b = cfg.block("simulate")
    seed = run.seed if run.seed is not None else _block_value(b, "seed", "simulate", default=0, kind=int)
    sc = SimulationConfig(
        dt=_block_value(b, "dt", "simulate"),
        T_sim=_block_value(b, "T", "simulate"),
        n_paths=_block_value(b, "n_paths", "simulate", kind=int),
        seed=seed,
        epsilon=b.get("epsilon"),
        record_stride=_block_value(b, "record_stride", "simulate", default=1, kind=int),
    )
    nonlinear = _block_value(b, "nonlinear", "simulate", default=False, kind=bool)
    with run.stage("simulate"):
        if nonlinear:
            if cfg.nonlinear is None:
                raise ConfigError("simulate.nonlinear needs a builtin model", "simulate.nonlinear")
            ens = simulate_nonlinear(cfg.nonlinear, cfg.history.shifted(-cfg.origin), sc, threads=run.threads)
        else:
            ens = simulate_linear(cfg.model, cfg.history, sc, threads=run.threads)
    # state frame of the ensemble: absolute for the nonlinear model, model coordinates otherwise
    shift = cfg.origin if nonlinear else np.zeros(cfg.model.dim)
    run.results.update(seed=int(seed), n_failed=int(ens.failed.sum()), clamp_count=ens.clamp_count)
    times = _block_value(b, "times", "simulate", default=[ens.times[-1]], kind="vector")
    if sc.n_paths < 2:
        log.warning("moments.csv skipped: moment estimation needs at least 2 paths")
    else:
        with run.stage("moments"):
            est = estimate_moments(ens, times)
        export.write_moments(run.path("moments.csv"), est)
    disk = b.get("disk")
    if disk is not None:
        c = cfg.to_local(_block_value(disk, "center", "simulate.disk", kind="vector")) + shift
        R = _block_value(disk, "R", "simulate.disk")
        stats = exit_statistics(ens, c, R)
        export.write_exits(run.path("exits.csv"), stats)
        run.results["exit_fraction"] = stats.fraction
        if stats.n_exited and ens.dim == 2:
            run.results["exit_direction_mode_deg"] = exit_direction_mode(stats, c)[0]
            with run.stage("plot"):
                run.figure(plotting.plot_exits, "exits", stats.points[stats.exited], c, R)
    if _block_value(b, "raw_paths", "simulate", default=False, kind=bool):
        export.write_paths(run.path("paths.csv"), ens)


HANDLERS = {
    "mean": cmd_mean,
    "cov": cmd_cov,
    "optimal-path": cmd_optimal_path,
    "escape": cmd_escape,
    "simulate": cmd_simulate,
}


def _parser():
    p = argparse.ArgumentParser(prog="gaussdelay", description="Large deviations for linear delay SDEs.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, metavar="PATH", help="TOML run configuration")
    p.add_argument("--out", default=".", metavar="DIR", help="output directory (default: current)")
    p.add_argument("--seed", type=int, default=None, metavar="U64", help="override simulate.seed")
    p.add_argument("--threads", type=int, default=1, metavar="INT", help="worker threads for simulation")
    p.add_argument("--svg", action="store_true", help="also write SVG figures")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _fail_line(code, exc):
    field = getattr(exc, "field", None)
    msg = " ".join(str(exc).split())
    tag = f" field={field}" if field else ""
    return f"error code={code} kind={type(exc).__name__}{tag}: {msg}"


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    collector = _Collector()
    log.addHandler(collector)
    record = {
        "tool": "gaussdelay",
        "version": __version__,
        "command": args.command,
        "config_path": os.path.abspath(args.config),
        "seed_override": args.seed,
        "threads": args.threads,
    }
    run = Run(args.out, svg=args.svg, threads=args.threads, seed=args.seed)
    code = 0
    t0 = time.perf_counter()
    try:
        os.makedirs(args.out, exist_ok=True)
        if args.seed is not None and not 0 <= args.seed < 2 ** 64:
            raise ConfigError("--seed must be an unsigned 64-bit integer", "seed")
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1", "threads")
        with run.stage("load_config"):
            cfg = load_config(args.config, args.command)
        record["config"] = cfg.raw
        record["model"] = {
            "source": cfg.source,
            "a": cfg.model.a.tolist(),
            "B": cfg.model.B.tolist(),
            "C": cfg.model.C.tolist(),
            "Sigma": cfg.model.Sigma.tolist(),
            "tau": cfg.model.tau,
            "epsilon": cfg.model.epsilon,
            "origin": cfg.origin.tolist(),
        }
        HANDLERS[args.command](cfg, run)
    except ParameterError as exc:
        code = 2
        record["error"] = _fail_line(code, exc)
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        code = 3
        record["error"] = _fail_line(code, exc)
    finally:
        log.removeHandler(collector)
    record.update(
        status="ok" if code == 0 else "error",
        exit_code=code,
        timings=dict(run.timings, total=round(time.perf_counter() - t0, 6)),
        outputs=run.outputs,
        results=run.results,
        warnings=collector.messages,
    )
    if code:
        print(record["error"], file=sys.stderr)
    try:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "run_record.json"), "w", encoding="utf-8", newline="\n") as fh:
            json.dump(record, fh, indent=2, default=str)
            fh.write("\n")
    except OSError as exc:
        print(f"warning: could not write run record: {exc}", file=sys.stderr)
    return code

