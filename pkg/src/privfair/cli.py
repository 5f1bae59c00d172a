"""Command-line front end.

Subcommands: certify, sweep, simulate, plan, verify-dp,
repro-counterexample, prop-suite, fixtures.  Exit codes: 0 on success (or
when a certificate holds), 1 when a check fails, 2 for usage and
configuration errors.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

from .certificates import AttributeMetric, certify
from .errors import PrivfairError
from .experiments import repro_counterexample, run_property_suite
from .mechanisms import PrivacyBudget, load_mechanism, verify_dp
from .model import load_world
from .nav import (
    a_star,
    build_top_view,
    build_traversability,
    gen_corridor,
    load_xyz,
    write_xyz,
)
from .remote import EndpointConfig, RemoteEngine
from .scenario import (
    builtin_hr_scenario,
    builtin_package_scenario,
    load_scenario,
    scenario_to_toml,
)
from .simulate import simulate_scenario
from .sweep import run_sweep_scenario, run_sweep_tabular, write_rows, rows_to_csv, rows_to_json
from .utility import load_utility

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=0, help="base RNG seed")
    parser.add_argument("--out", help="output file path")
    parser.add_argument(
        "--format", choices=("csv", "json"), default="csv", help="tabular output format"
    )


def _metric_from_arg(arg: str | None) -> AttributeMetric:
    if arg in (None, "discrete"):
        return AttributeMetric()
    with open(arg, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    return AttributeMetric(kind="explicit", distances=data["distances"])


def _cmd_certify(args) -> int:
    world = load_world(args.world)
    g = load_utility(args.utility, world)
    metric = _metric_from_arg(args.metric)
    mech_a = load_mechanism(args.mech_a)
    mech_x = load_mechanism(args.mech_x) if args.mech_x else None
    cert = certify(world, g, metric, mech_a, mech_x=mech_x, epsilon=args.eps)
    text = json.dumps(cert.to_dict(), indent=2, sort_keys=True) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    sys.stdout.write(text)
    return EXIT_OK if cert.holds else EXIT_CHECK_FAILED


def _cmd_verify_dp(args) -> int:
    mech = load_mechanism(args.mech)
    verdict = verify_dp(mech, PrivacyBudget(args.eps, args.delta))
    if verdict.passed:
        print(
            f"pass: mechanism satisfies ({args.eps}, {args.delta})-DP "
            f"(tightest delta at this epsilon: {verdict.achieved_delta:.6g})"
        )
        return EXIT_OK
    print(
        f"fail: tightest delta at epsilon={args.eps} is {verdict.achieved_delta:.6g} "
        f"> {args.delta}"
    )
    print(f"  witness inputs: {verdict.witness_pair[0]!r} vs {verdict.witness_pair[1]!r}")
    print(f"  witness event: {list(verdict.witness_event)}")
    return EXIT_CHECK_FAILED


def _cmd_sweep(args) -> int:
    grid = [float(tok) for tok in args.grid.split(",") if tok.strip() != ""]
    if args.world:
        world = load_world(args.world)
        g = load_utility(args.utility, world)
        rows = run_sweep_tabular(
            world,
            g,
            grid,
            metric=_metric_from_arg(args.metric),
            samples=args.samples,
            seed=args.seed,
            smoothing=args.smoothing,
        )
    else:
        scenario = load_scenario(args.scenario)
        engine = scenario.make_engine(args.engine)
        rows = run_sweep_scenario(
            scenario,
            engine,
            grid,
            samples=args.samples,
            seed=args.seed,
            smoothing=args.smoothing,
        )
    if args.out:
        write_rows(rows, args.out, args.format)
    else:
        sys.stdout.write(rows_to_csv(rows) if args.format == "csv" else rows_to_json(rows))
    return EXIT_OK


def _make_engine(args, scenario):
    if args.engine == "remote":
        if not args.endpoint:
            raise PrivfairError("remote engine requires --endpoint CONFIG.json")
        return RemoteEngine(EndpointConfig.load(args.endpoint))
    return scenario.make_engine(args.engine)


def _cmd_simulate(args) -> int:
    scenario = load_scenario(args.scenario)
    engine = _make_engine(args, scenario)
    doc = simulate_scenario(
        scenario,
        engine,
        trials=args.trials,
        seed=args.seed,
        epsilon=args.eps,
        smoothing=args.smoothing,
        out_path=args.out,
    )
    summary = doc["summary"]
    print(json.dumps(summary, indent=2, sort_keys=True))
    if summary["n_failed"]:
        print(f"warning: {summary['n_failed']} of {summary['n_trials']} trials failed")
    return EXIT_OK


def _parse_cell(text: str) -> tuple[int, int]:
    row, col = text.split(",")
    return int(row), int(col)


def _cmd_plan(args) -> int:
    cloud = load_xyz(args.cloud)
    env = build_top_view(cloud, args.res, args.ceiling)
    env = build_traversability(env, args.hmin, args.hmax)
    connectivity = "eight" if args.conn == 8 else "four"
    plan = a_star(env, _parse_cell(args.start), _parse_cell(args.goal), connectivity)
    payload = {"cells": [list(c) for c in plan.cells], "cost": plan.cost}
    text = json.dumps(payload) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    sys.stdout.write(text)
    return EXIT_OK


def _cmd_fixtures(args) -> int:
    if args.fixture == "gen-corridor":
        cloud, mask, named = gen_corridor(size=args.size, resolution=args.res)
        write_xyz(cloud, args.out)
        print(f"wrote {len(cloud.points)} points to {args.out}")
        if args.mask_out:
            payload = {
                "traversable": mask.astype(int).tolist(),
                "cells": {k: list(v) for k, v in named.items()},
            }
            with open(args.mask_out, "w", encoding="utf-8") as fh:
                json.dump(payload, fh)
            print(f"wrote ground-truth mask to {args.mask_out}")
        return EXIT_OK
    if args.fixture == "gen-scenario":
        scenario = builtin_hr_scenario() if args.kind == "hr" else builtin_package_scenario()
        text = scenario_to_toml(scenario)
        if args.out:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(text)
            print(f"wrote {args.kind} scenario to {args.out}")
        else:
            sys.stdout.write(text)
        return EXIT_OK
    if args.fixture == "mock-server":
        from .mockserver import serve_forever

        serve_forever(script_path=args.script, port=args.port)
        return EXIT_OK
    raise PrivfairError(f"unknown fixture {args.fixture!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="privfair",
        description="Fairness certification for privatised decision pipelines",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("certify", help="emit a privacy-to-fairness certificate")
    p.add_argument("--world", required=True, help="world JSON file")
    p.add_argument("--utility", required=True, help="utility JSON file")
    p.add_argument("--metric", help="'discrete' (default) or explicit metric JSON")
    p.add_argument("--mech-a", required=True, dest="mech_a", help="A-mechanism JSON")
    p.add_argument("--mech-x", dest="mech_x", help="optional X-mechanism JSON")
    p.add_argument("--eps", type=float, help="epsilon at which to read the budget")
    _common(p)
    p.set_defaults(fn=_cmd_certify)

    p = sub.add_parser("verify-dp", help="check a declared (epsilon, delta) budget")
    p.add_argument("--mech", required=True, help="mechanism JSON")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--delta", type=float, default=0.0)
    _common(p)
    p.set_defaults(fn=_cmd_verify_dp)

    p = sub.add_parser("sweep", help="fairness metrics across an epsilon grid")
    p.add_argument("--world", help="world JSON (tabular sweep)")
    p.add_argument("--utility", help="utility JSON (tabular sweep)")
    p.add_argument("--metric", help="'discrete' or explicit metric JSON")
    p.add_argument("--scenario", help="scenario TOML (engine sweep)")
    p.add_argument("--engine", default="synthetic", choices=("synthetic", "tabular"))
    p.add_argument("--grid", required=True, help="comma-separated ascending epsilons")
    p.add_argument("--samples", type=int, default=50, help="samples per grid point")
    p.add_argument("--smoothing", type=float, default=0.5)
    _common(p)
    p.set_defaults(fn=_cmd_sweep)

    p = sub.add_parser("simulate", help="run scenario trials through an engine")
    p.add_argument("--scenario", required=True, help="scenario TOML")
    p.add_argument(
        "--engine", default="synthetic", choices=("synthetic", "tabular", "remote")
    )
    p.add_argument("--endpoint", help="endpoint config JSON for the remote engine")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--eps", type=float, help="per-attribute epsilon (omit for identity)")
    p.add_argument("--smoothing", type=float, default=0.5)
    _common(p)
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser("plan", help="A* path on a traversability map")
    p.add_argument("--cloud", required=True, help="scene .xyz file")
    p.add_argument("--res", type=float, default=0.05)
    p.add_argument("--ceiling", type=float, default=2.3)
    p.add_argument("--hmin", type=float, default=0.0)
    p.add_argument("--hmax", type=float, default=0.3)
    p.add_argument("--start", required=True, help="R,C grid cell")
    p.add_argument("--goal", required=True, help="R,C grid cell")
    p.add_argument("--conn", type=int, choices=(4, 8), default=8)
    _common(p)
    p.set_defaults(fn=_cmd_plan)

    p = sub.add_parser(
        "repro-counterexample", help="reproduce the X-privacy counterexample values"
    )
    _common(p)
    p.set_defaults(fn=lambda args: repro_counterexample())

    p = sub.add_parser("prop-suite", help="randomized theorem checks")
    p.add_argument("--count", type=int, default=10000, help="instances per check")
    _common(p)
    p.set_defaults(fn=lambda args: run_property_suite(seed=args.seed, count=args.count))

    p = sub.add_parser("fixtures", help="generate bundled fixtures")
    fix = p.add_subparsers(dest="fixture", required=True)

    f = fix.add_parser("gen-corridor", help="synthetic corridor scene")
    f.add_argument("--size", type=int, default=20)
    f.add_argument("--res", type=float, default=0.05)
    f.add_argument("--out", required=True, help="scene .xyz output path")
    f.add_argument("--mask-out", dest="mask_out", help="ground-truth mask JSON")
    f.set_defaults(fn=_cmd_fixtures)

    f = fix.add_parser("gen-scenario", help="write a builtin scenario file")
    f.add_argument("--kind", choices=("hr", "package"), default="hr")
    f.add_argument("--out", help="scenario TOML output path")
    f.set_defaults(fn=_cmd_fixtures)

    f = fix.add_parser("mock-server", help="run the canned chat-completion server")
    f.add_argument("--script", help="JSON script of canned responses")
    f.add_argument("--port", type=int, default=8723)
    f.set_defaults(fn=_cmd_fixtures)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "sweep":
        has_world = bool(args.world and args.utility)
        if has_world == bool(args.scenario):
            parser.error("sweep needs either --world plus --utility, or --scenario")
    try:
        return args.fn(args)
    except PrivfairError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
