"""Command-line entry point: ``cvabac run|eval|groups|effview``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from typing import Optional, Sequence

from .config import DEFAULT_FLEET, DEFAULT_POLICY, ConfigError, build_world, data_path, load_json
from .inheritance import eff_all
from .model import RegistryError
from .policy import PolicyError, evaluate, parse_expr
from .sim import SCENARIOS, emit_metrics_csv, make_scenario, run_scenario, summary_line

log = logging.getLogger("cvabac")

EXIT_OK, EXIT_CONFIG, EXIT_POLICY = 0, 2, 3


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cvabac",
                                     description="ABAC with dynamic groups for a simulated vehicle fleet")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a seeded fleet scenario and write metrics CSV")
    run.add_argument("--scenario", choices=SCENARIOS, required=True)
    run.add_argument("--config", help="fleet/group JSON (default: bundled fleet)")
    run.add_argument("--policy", help="policy document JSON (default: bundled policies)")
    run.add_argument("--vehicles", type=int, default=50)
    run.add_argument("--requests", type=int, default=25)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--out", required=True, help="metrics CSV path")
    run.add_argument("--no-policy", action="store_true", help="broadcast baseline, no policy checks")
    run.add_argument("--log", help="write the event log to this file")
    run.add_argument("--timing", choices=("wall", "logical"), default="wall",
                     help="logical counts evaluated policy nodes instead of microseconds")
    run.add_argument("--summary", action="store_true", help="append a '#' totals footer to the CSV")

    ev = sub.add_parser("eval", help="evaluate one policy expression")
    ev.add_argument("--expr", required=True)
    ev.add_argument("--source", required=True)
    ev.add_argument("--target", required=True)
    ev.add_argument("--config", required=True)
    ev.add_argument("--policy", help="policy document used during warm-up")

    groups = sub.add_parser("groups", help="show vehicle group assignments after warm-up")
    groups.add_argument("--config", required=True)
    groups.add_argument("--policy")
    groups.add_argument("--table", action="store_true", help="aligned text table instead of JSON")
    groups.add_argument("--ticks", type=int, default=0, help="extra seeded movement ticks")
    groups.add_argument("--vehicles", type=int, default=0)
    groups.add_argument("--seed", type=int, default=0)

    eff = sub.add_parser("effview", help="print an entity's effective attributes as JSON")
    eff.add_argument("--entity", required=True)
    eff.add_argument("--config")
    eff.add_argument("--policy")
    return parser


def _load(args) -> tuple:
    config = load_json(args.config or data_path(DEFAULT_FLEET))
    policy = load_json(args.policy or data_path(DEFAULT_POLICY))
    return config, policy


def _cmd_run(args) -> int:
    if args.vehicles < 0 or args.requests < 0:
        raise ConfigError("--vehicles and --requests must be non-negative")
    config, policy = _load(args)
    scenario = make_scenario(args.scenario, config, vehicles=args.vehicles,
                             requests=args.requests, seed=args.seed)
    result = run_scenario(scenario, policy, config, policy_enabled=not args.no_policy,
                          timing=args.timing)
    try:
        emit_metrics_csv(result.records, args.out, footer=args.summary)
        if args.log:
            with open(args.log, "w", encoding="utf-8", newline="") as handle:
                handle.write(result.event_log)
    except OSError as err:
        raise ConfigError(str(err), "output") from err
    print(summary_line(result.records).lstrip("# "))
    return EXIT_OK


def _warm_world(args):
    config = load_json(args.config)
    policy = load_json(args.policy) if args.policy else {"policies": []}
    world = build_world(config, policy)
    world.apply_warmup()
    return world


def _cmd_eval(args) -> int:
    world = _warm_world(args)
    expr = parse_expr(args.expr, world.registry.schema)
    for ref in (args.source, args.target):
        if ref not in world.registry:
            raise ConfigError(f"unknown entity {ref!r}")
    try:
        allowed = evaluate(expr, world.registry, args.source, args.target)
    except (PolicyError, RegistryError) as err:
        log.warning("evaluation error: %s", err)
        allowed = False
    print("allow" if allowed else "deny")
    return EXIT_OK


def _cmd_groups(args) -> int:
    if args.ticks > 0:
        config = load_json(args.config)
        policy = load_json(args.policy) if args.policy else {"policies": []}
        scenario = make_scenario("car-pool", config, vehicles=args.vehicles, requests=0,
                                 seed=args.seed, ticks=args.ticks)
        controller = run_scenario(scenario, policy, config, timing="logical").world.controller
    else:
        controller = _warm_world(args).controller
    if args.table:
        print(controller.render_assignment_table())
    else:
        rows = [{"thing": r.thing_name, "location": r.location_group, "subgroup": r.subgroup,
                 "since": r.since_seq} for r in controller.assignment_table()]
        print(json.dumps(rows, indent=2))
    return EXIT_OK


def _cmd_effview(args) -> int:
    config, policy = _load(args)
    world = build_world(config, policy)
    world.apply_warmup()
    if args.entity not in world.registry:
        raise ConfigError(f"unknown entity {args.entity!r}")
    print(eff_all(world.registry, args.entity).to_json())
    return EXIT_OK


COMMANDS = {"run": _cmd_run, "eval": _cmd_eval, "groups": _cmd_groups, "effview": _cmd_effview}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_CONFIG
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except PolicyError as err:
        print(f"policy error: {err}", file=sys.stderr)
        return EXIT_POLICY
    except (ConfigError, RegistryError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
