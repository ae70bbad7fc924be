"""Command line entry point: ``towgame {solve,simulate,residuals,converge,estimates}``."""

from __future__ import annotations

import argparse
import logging
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import boundary_estimate_suite, convergence_study, pde_residuals
from .config import RunConfig, load_config
from .dpp import dpp_residual, solve_dpp
from .errors import ConfigurationError, TowGameError, exit_code_for
from .game import GameRules, GameState, estimate_value
from .geometry import build_grid
from .io_formats import (
    convergence_rows,
    estimate_rows,
    residual_rows,
    write_field_pack,
    write_json,
    write_level_csvs,
    write_table,
    write_traces,
)
from .strategies import strategy_from_spec

log = logging.getLogger("towgame")

SUBCOMMANDS = ("solve", "simulate", "residuals", "converge", "estimates")


def _report_base(cfg: RunConfig, command: str) -> dict:
    return {
        "command": command,
        "config": cfg.to_dict(),
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
    }


def _solve(cfg: RunConfig):
    data = cfg.problem()
    grid = build_grid(data.domain, cfg.h, cfg.eps, cfg.T)
    s = cfg.solver
    t0 = time.perf_counter()
    pair = solve_dpp(data, grid, cfg.tol, s["max_iter"] or None, s["scheme"], s["threads"])
    return data, grid, pair, time.perf_counter() - t0


def _slice_rows(pair) -> list[dict]:
    return [
        {
            "level": st.level, "t": st.time, "iterations": st.iterations,
            "first_increment": st.first_increment, "last_increment": st.last_increment, "max_ratio": st.max_ratio,
        }
        for st in pair.meta
    ]


def cmd_solve(cfg: RunConfig, out: Path) -> dict:
    data, grid, pair, wall = _solve(cfg)
    write_field_pack(pair, out / "field.pack")
    write_level_csvs(pair, out / "levels")
    write_table(out / "slices.csv", _slice_rows(pair))
    res = dpp_residual(pair, data, grid)
    info = data.validate(grid)
    return {
        "grid": grid.report(),
        "n_nodes": grid.n_nodes,
        "n_interior": grid.n_interior,
        "levels": grid.M,
        "clamped_last_level": grid.clamped,
        "C": info["C"],
        "lipschitz": info["L"],
        "compatibility_gap": info["compatibility_gap"],
        "max_abs_u": float(np.abs(pair.u).max()),
        "max_abs_v": float(np.abs(pair.v).max()),
        "dpp_residual_u": res.u_residual,
        "dpp_residual_v": res.v_residual,
        "slices": [dict(r, wall=st.wall) for r, st in zip(_slice_rows(pair), pair.meta)],
        "wall": wall,
    }


def cmd_simulate(cfg: RunConfig, out: Path, threads: int) -> dict:
    sim = cfg.simulation
    if not sim["starts"]:
        raise ConfigurationError("no start points", "simulation.starts")
    needs_field = any(s.strip().startswith("greedy") for s in (sim["strategy_I"], sim["strategy_II"]))
    data = cfg.problem()
    pair = grid = None
    if needs_field:
        data, grid, pair, _ = _solve(cfg)
    s_I = strategy_from_spec(sim["strategy_I"], pair, grid, data)
    s_II = strategy_from_spec(sim["strategy_II"], pair, grid, data)
    rules = GameRules.for_data(data)
    t0 = sim["t0"] if sim["t0"] is not None else cfg.T
    rows, traces = [], []
    for i, x in enumerate(sim["starts"]):
        for board in sim["boards"]:
            res = estimate_value(
                GameState(np.asarray(x, dtype=float), t0, board), s_I, s_II, sim["n"], sim["seed"], data, rules,
                block_size=sim["block_size"], threads=threads, trace=sim["trace"],
            )
            row = {"start": i, **{f"x{k + 1}": float(c) for k, c in enumerate(x)}, "t0": t0, "board": board}
            row.update(res.summary())
            if pair is not None:
                m = pair.level_of(t0) if np.any(np.abs(pair.times - t0) <= 1e-9 * cfg.eps**2) else pair.M
                field = pair.u if board == 1 else pair.v
                row["dpp_value"] = float(grid.interpolate(field[m], np.asarray(x, dtype=float)[None])[0])
            rows.append(row)
            traces.extend(res.traces)
    write_table(out / "simulate.csv", rows)
    if traces:
        write_traces(out / "traces.jsonl", traces)
    return {"rows": rows}


def cmd_residuals(cfg: RunConfig, out: Path) -> dict:
    data, grid, pair, wall = _solve(cfg)
    r = cfg.residuals
    rep = pde_residuals(pair, grid, data, r["grad_floor"], r["margin"], r["t_min"], r["stride"])
    write_table(out / "residuals.csv", residual_rows(rep))
    write_field_pack(pair, out / "field.pack")
    return {"summary": rep.summary(), "wall": wall}


def cmd_converge(cfg: RunConfig, out: Path, threads: int) -> dict:
    c = cfg.converge
    table = convergence_study(
        cfg.problem(), c["eps_list"], c["h_ratio"], c["tol"] or cfg.tol,
        exact=cfg.exact_pair(), margin=c["margin"], t_min=c["t_min"], grad_floor=c["grad_floor"], stride=c["stride"],
        scheme=cfg.solver["scheme"], threads=threads,
    )
    write_table(out / "convergence.csv", convergence_rows(table))
    return {
        "reference": table.reference,
        "table": table.summary(),
        "runtime": {r.eps: r.runtime for r in table.rows},
    }


def cmd_estimates(cfg: RunConfig, out: Path, threads: int) -> dict:
    e = cfg.estimates
    suite = boundary_estimate_suite(
        cfg.domain(), cfg.problem(), e["eps_list"], e["a"], e["eta"], e["n"],
        r0_list=e["r0_list"], y=e["target"], opponent=e["opponent"], seed=e["seed"],
        t0=e["t0"], theta=e["theta"], walk=e["walk"], threads=threads,
    )
    write_table(out / "estimates.csv", estimate_rows(suite))
    return {"summary": suite.summary()}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="towgame", description="Two-board tug-of-war / random-walk game solver.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, type=Path, help="TOML run config")
        p.add_argument("--out", type=Path, help="output directory (overrides output.dir)")
        p.add_argument("--seed", type=int, help="master seed (overrides simulation.seed / estimates.seed)")
        p.add_argument("--threads", type=int, help="worker threads; affects speed only")
        p.add_argument("--eps-list", help="comma-separated eps values for converge / estimates")
        p.add_argument("-v", "--verbose", action="count", default=0)
    return ap


def _overrides(args) -> dict:
    over: dict = {}
    if args.seed is not None:
        if args.seed < 0 or args.seed >= 2**64:
            raise ConfigurationError("seed must be an unsigned 64-bit integer", "--seed")
        over["simulation"] = {"seed": args.seed}
        over["estimates"] = {"seed": args.seed}
    if args.threads is not None:
        over["solver"] = {"threads": args.threads}
    if args.eps_list:
        try:
            vals = [float(v) for v in args.eps_list.replace(",", " ").split()]
        except ValueError:
            raise ConfigurationError(f"not a list of numbers: {args.eps_list!r}", "--eps-list") from None
        key = "estimates" if args.command == "estimates" else "converge"
        over.setdefault(key, {})["eps_list"] = vals
    return over


def run(cfg: RunConfig, command: str, out: Path | None = None) -> dict:
    out = Path(out) if out is not None else cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    threads = cfg.solver["threads"]
    start = time.perf_counter()
    if command == "solve":
        body = cmd_solve(cfg, out)
    elif command == "simulate":
        body = cmd_simulate(cfg, out, threads)
    elif command == "residuals":
        body = cmd_residuals(cfg, out)
    elif command == "converge":
        body = cmd_converge(cfg, out, threads)
    elif command == "estimates":
        body = cmd_estimates(cfg, out, threads)
    else:
        raise ValueError(f"unknown subcommand {command!r}")
    report = _report_base(cfg, command)
    report["result"] = body
    report["total_wall"] = time.perf_counter() - start
    write_json(out / "report.json", report)
    return report


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s"
    )
    try:
        over = _overrides(args)
        cfg = load_config(args.config, over)
        run(cfg, args.command, args.out)
    except TowGameError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exit_code_for(exc)
    return 0


if __name__ == "__main__":
    sys.exit(main())
