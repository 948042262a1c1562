"""Command-line interface: evasion checks, single-trial trajectories, and
Monte Carlo sweeps.  Exit code 0 on success, nonzero with a one-line
machine-parsable error otherwise."""
from __future__ import annotations

import argparse
import math
import sys

from .errors import LanesafeError
from .evasion import evasion_exists
from .harness import (SweepConfig, load_sweep_config, run_sweep, write_results)
from .planner import KIND_NETWORK, PlannerSpec, load_weights
from .sim import MODE_CV_ALL, MODES, mask_observation, run_trial, write_trajectory
from .types import load_scenario, validate_scenario
from .worst_case import propagate_chain


def _fmt(x: float) -> str:
    if math.isinf(x):
        return "inf"
    return f"{x:.4f}"


def _cmd_check(args) -> int:
    cfg = validate_scenario(load_scenario(args.scenario))
    leaders = cfg.leaders
    view = mask_observation(args.mode, [s.state for s in leaders],
                            [s.promise for s in leaders],
                            cfg.follower.state if cfg.follower else None,
                            bool(cfg.follower and cfg.follower.connected),
                            cfg.event.decel, cfg.limits)
    chain = propagate_chain(list(view.leader_states),
                            list(view.leader_promises),
                            view.chain_event_decel, cfg.geometry.p_m,
                            cfg.limits, clamp_infeasible=True)
    follower_model = None
    if cfg.follower is not None:
        follower_model = ("collaborative"
                          if view.follower_directive == "connected_collaborative"
                          else "aggressive")
    check = evasion_exists(cfg.ego, view.leader_states[0],
                           view.follower_state, chain, follower_model,
                           cfg.geometry, cfg.limits)
    print(f"mode: {args.mode}")
    print("chain_decels:", " ".join(_fmt(d) for d in chain.decels))
    print(f"evasion_exists: {str(check.exists).lower()}")
    lat = check.lateral
    print(f"lateral: t_1={_fmt(lat.t_1)} t_y_f={_fmt(lat.t_y_f)} "
          f"y_target={_fmt(lat.y_target)}")
    if check.longitudinal is not None:
        lon = check.longitudinal
        print(f"longitudinal: case={lon.case_id} t_x_1={_fmt(lon.t_x_1)} "
              f"t_x_2={_fmt(lon.t_x_2)} tau_1={_fmt(lon.tau_1)} "
              f"tau_2={_fmt(lon.tau_2)} a_x_1_d={_fmt(lon.a_x_1_d)}")
    else:
        print("longitudinal: infeasible")
    print(f"limiting_constraint: {check.limiting_constraint or 'none'}")
    return 0


def _cmd_simulate(args) -> int:
    cfg = validate_scenario(load_scenario(args.scenario))
    spec = PlannerSpec()
    if args.planner:
        spec = PlannerSpec(kind=KIND_NETWORK, network=load_weights(args.planner))
    result = run_trial(cfg, args.mode, spec, args.seed, record_trajectory=True)
    write_trajectory(result.trajectory, args.out)
    comp = "" if result.completion_time is None else \
        f" completion_time={result.completion_time:.3f}"
    print(f"success={str(result.success).lower()} "
          f"collision={str(result.collision).lower()} "
          f"aborts={result.abort_count}{comp}")
    print(f"trajectory written to {args.out}")
    return 0


def _cmd_sweep(args) -> int:
    sweep = load_sweep_config(args.config) if args.config else SweepConfig()
    overrides = {}
    if args.trials is not None:
        overrides["trials_per_cell"] = args.trials
    if args.seed is not None:
        overrides["seed"] = args.seed
    if overrides:
        from dataclasses import replace
        sweep = replace(sweep, **overrides)
    rows = run_sweep(sweep, parallelism=args.parallel)
    write_results(rows, args.out)
    print(f"{len(rows)} rows written to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="lanesafe",
        description="Safety-verified lane changing: checks, trials, sweeps")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", help="evasion existence from a scenario's initial state")
    c.add_argument("--scenario", required=True)
    c.add_argument("--mode", default=MODE_CV_ALL, choices=MODES)
    c.set_defaults(func=_cmd_check)

    s = sub.add_parser("simulate", help="run one trial and dump the trajectory CSV")
    s.add_argument("--scenario", required=True)
    s.add_argument("--mode", required=True, choices=MODES)
    s.add_argument("--planner", default=None, help="network weights JSON")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_simulate)

    w = sub.add_parser("sweep", help="Monte Carlo grid sweep, results CSV")
    w.add_argument("--config", default=None, help="sweep config JSON")
    w.add_argument("--out", required=True)
    w.add_argument("--parallel", type=int, default=1)
    w.add_argument("--trials", type=int, default=None)
    w.add_argument("--seed", type=int, default=None)
    w.set_defaults(func=_cmd_sweep)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except LanesafeError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
