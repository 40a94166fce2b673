"""Command-line front end: search runs, landscape grids, estimator traces.

Subcommands: search, landscape, compare, diagnose. Every command reads a
flat key=value config, writes its CSV artifacts plus a manifest.json into
--out, and exits 0 only if the run completed with all embedded invariant
checks passing.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from datetime import datetime, timezone

import numpy as np

from . import artifacts
from .config import ConfigError, Estimator, ProblemConfig, SearchConfig, load_config
from .driver import landscape_grid, run_search, trajectory_trace
from .problems import build_problem
from .rng import STREAM_ALPHA_INIT, rng_split


def _timestamp() -> str:
    return datetime.now(timezone.utc).isoformat()


def _load(args) -> tuple[SearchConfig, ProblemConfig]:
    search, problem = load_config(args.config)
    if args.seed is not None:
        search = dataclasses.replace(search, seed=args.seed)
    if getattr(args, "estimator", None):
        search = dataclasses.replace(search, estimator=Estimator(args.estimator), darts_order=0)
    if getattr(args, "budget", None) is not None:
        search = dataclasses.replace(search, budget=args.budget)
    return search, problem


def cmd_search(args) -> int:
    search, problem_cfg = _load(args)
    os.makedirs(args.out, exist_ok=True)
    manifest = artifacts.RunManifest(
        command="search", config=artifacts.config_echo(search, problem_cfg), started=_timestamp()
    )
    problem = build_problem(problem_cfg)
    trajectory = run_search(problem, search)
    manifest.add_artifact(args.out, "trajectory.csv", artifacts.trajectory_csv(trajectory))
    manifest.add_artifact(args.out, "diagnostics.csv", artifacts.diagnostics_csv(trajectory))
    manifest.invariant_violations = trajectory.verify()
    manifest.error = trajectory.error
    manifest.finished = _timestamp()
    manifest.write(args.out)
    if not manifest.ok:
        print(f"search failed: {manifest.error or manifest.invariant_violations}", file=sys.stderr)
        return 1
    return 0


def cmd_landscape(args) -> int:
    search, problem_cfg = _load(args)
    os.makedirs(args.out, exist_ok=True)
    manifest = artifacts.RunManifest(
        command="landscape", config=artifacts.config_echo(search, problem_cfg), started=_timestamp()
    )
    problem = build_problem(problem_cfg)
    m = args.m if args.m is not None else search.m
    center = problem.initial_alpha(rng_split(search.seed, STREAM_ALPHA_INIT))
    grid = landscape_grid(
        problem,
        center,
        mode=args.mode,
        bounds=(problem_cfg.grid_min, problem_cfg.grid_max),
        step=problem_cfg.grid_step,
        seed=search.seed,
        m=m,
        inner_lr=search.inner_lr,
        inner_momentum=search.inner_momentum,
    )
    manifest.add_artifact(args.out, f"landscape_{args.mode}.csv", artifacts.landscape_text(grid, m))
    manifest.finished = _timestamp()
    manifest.write(args.out)
    return 0


def cmd_compare(args) -> int:
    search, problem_cfg = _load(args)
    if len(problem_cfg.estimators) < 2:
        print(
            "compare requires at least two estimators in the config "
            "(key 'estimators', comma-separated)",
            file=sys.stderr,
        )
        return 2
    os.makedirs(args.out, exist_ok=True)
    manifest = artifacts.RunManifest(
        command="compare", config=artifacts.config_echo(search, problem_cfg), started=_timestamp()
    )
    problem = build_problem(problem_cfg)
    trace = trajectory_trace(problem, search, list(problem_cfg.estimators))
    endpoint_lines = ["estimator,a,b,dist_alpha_star"]
    errors = []
    for name, path in trace.paths.items():
        trajectory = trace.trajectories[name]
        losses = [rec.val_loss for rec in trajectory.records]
        manifest.add_artifact(args.out, f"path_{name}.csv", artifacts.path_csv(path, losses))
        if trajectory.error:
            errors.append(f"{name}: {trajectory.error}")
        manifest.invariant_violations.extend(trajectory.verify())
        final_a, final_b = path[-1]
        if hasattr(problem, "alpha_star"):
            dist = float(np.linalg.norm(trajectory.final_alpha - problem.alpha_star))
            endpoint_lines.append(
                f"{name},{artifacts.fmt(final_a)},{artifacts.fmt(final_b)},{artifacts.fmt(dist)}"
            )
        else:
            endpoint_lines.append(f"{name},{artifacts.fmt(final_a)},{artifacts.fmt(final_b)},")
    manifest.add_artifact(args.out, "endpoints.csv", "\n".join(endpoint_lines) + "\n")
    manifest.error = "; ".join(errors) if errors else None
    manifest.finished = _timestamp()
    manifest.write(args.out)
    if not manifest.ok:
        print(f"compare failed: {manifest.error or manifest.invariant_violations}", file=sys.stderr)
        return 1
    return 0


def cmd_diagnose(args) -> int:
    source = args.run
    if os.path.isdir(source):
        source = os.path.join(source, "diagnostics.csv")
    if not os.path.exists(source):
        print(f"no diagnostics file at {source}", file=sys.stderr)
        return 2
    with open(source, "r", encoding="utf-8") as fh:
        lines = fh.read().strip().splitlines()
    rows = [line.split(",") for line in lines[1:]]
    os.makedirs(args.out, exist_ok=True)
    manifest = artifacts.RunManifest(command="diagnose", config={"source": source}, started=_timestamp())
    if rows:
        ess = np.array([float(r[1]) for r in rows])
        esr = np.array([float(r[2]) for r in rows])
        summary = (
            "metric,count,mean,min,max\n"
            f"ess,{ess.size},{artifacts.fmt(ess.mean())},{artifacts.fmt(ess.min())},{artifacts.fmt(ess.max())}\n"
            f"esr,{esr.size},{artifacts.fmt(esr.mean())},{artifacts.fmt(esr.min())},{artifacts.fmt(esr.max())}\n"
        )
    else:
        summary = "metric,count,mean,min,max\n"
    manifest.add_artifact(args.out, "diagnose_summary.csv", summary)
    manifest.finished = _timestamp()
    manifest.write(args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="zobilevel", description="Zero-order bi-level search experiments"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        if config_required:
            p.add_argument("--config", required=True, help="flat key=value config file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")

    p_search = sub.add_parser("search", help="run one search and emit trajectory CSVs")
    common(p_search)
    p_search.add_argument("--estimator", default=None, help="override the config estimator")
    p_search.add_argument("--budget", type=int, default=None, help="override the iteration budget")
    p_search.set_defaults(fn=cmd_search)

    p_land = sub.add_parser("landscape", help="emit a validation-loss grid")
    common(p_land)
    p_land.add_argument("--mode", choices=("first_order", "finetuned"), default="finetuned")
    p_land.add_argument("--m", type=int, default=None, help="fine-tune steps per grid point")
    p_land.set_defaults(fn=cmd_landscape)

    p_cmp = sub.add_parser("compare", help="trace several estimators from a shared start")
    common(p_cmp)
    p_cmp.add_argument("--budget", type=int, default=None, help="override the iteration budget")
    p_cmp.set_defaults(fn=cmd_compare)

    p_diag = sub.add_parser("diagnose", help="re-emit sampling diagnostics summaries")
    p_diag.add_argument("--run", required=True, help="run directory or diagnostics.csv path")
    p_diag.add_argument("--out", required=True, help="output directory")
    p_diag.set_defaults(fn=cmd_diagnose)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
