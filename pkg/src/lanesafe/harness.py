"""Monte Carlo experiment harness: scenario sampling, grid sweeps over
(N, emergency deceleration, planner mode, violation rate), aggregation and
CSV emission.

Per-trial seeds derive from a splittable counter-based scheme keyed by
(sweep seed, cell parameters, trial index) but not the mode, so the four
planner modes see identical worlds and the results are independent of
scheduling and parallelism degree.
"""
from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyResults, GapTooSmall
from .planner import PlannerSpec
from .sim import MODES, TrialResult, run_trial
from .types import (DEFAULT_A_M_A, ConnectivityPromise, EventSpec,
                    LaneGeometry, MechanicalLimits, ScenarioConfig,
                    SurroundingVehicle, VehicleState,
                    NATURE_AGGRESSIVE, NATURE_COLLABORATIVE,
                    ROLE_FOLLOWER, ROLE_LEADER)
from .worst_case import FORMULA_CERTIFIED

RESULTS_HEADER = ("n_connected,decel,planner_mode,p_v,trials,successes,"
                  "collisions,success_rate,collision_rate,mean_completion_time")


@dataclass(frozen=True, slots=True)
class SweepConfig:
    """Grid definition plus the sampling protocol of each trial."""

    n_values: tuple[int, ...] = (1, 3, 5, 10)
    decel_values: tuple[float, ...] = (2.0, 3.0, 4.0, 5.0, 6.0)
    modes: tuple[str, ...] = MODES
    p_v_values: tuple[float, ...] = (0.0, 0.05, 0.1, 0.2)
    trials_per_cell: int = 500
    seed: int = 0
    v0_range: tuple[float, float] = (29.0, 31.0)
    dp_range: tuple[float, float] = (17.0, 22.0)
    a_m_d: float = 0.5
    v_leaders: float = 30.0
    follower_connected_prob: float = 0.5
    follower_aggressive_prob: float = 0.5
    trigger_time: float = 1.0
    dt: float = 0.1
    horizon: float = 10.0
    limits: MechanicalLimits = field(default_factory=MechanicalLimits)
    geometry: LaneGeometry = field(default_factory=LaneGeometry)

    def check(self) -> None:
        if self.trials_per_cell < 1:
            raise ValueError("trials_per_cell must be >= 1")
        for name in ("v0_range", "dp_range"):
            lo, hi = getattr(self, name)
            if hi < lo:
                raise ValueError(f"{name} must be ordered, got ({lo}, {hi})")
        for m in self.modes:
            if m not in MODES:
                raise ValueError(f"unknown mode {m!r}")

    def cells(self) -> list[tuple[int, float, str, float]]:
        return [(n, d, m, pv)
                for n in self.n_values
                for d in self.decel_values
                for m in self.modes
                for pv in self.p_v_values]


@dataclass(frozen=True, slots=True)
class SweepRow:
    n_connected: int
    decel: float
    planner_mode: str
    p_v: float
    trials: int
    successes: int
    collisions: int
    success_rate: float
    collision_rate: float
    mean_completion_time: float  # nan when no trial succeeded


def sample_scenario(rng, sweep: SweepConfig,
                    cell: tuple[int, float, str, float]) -> ScenarioConfig:
    """Draw one scenario for a grid cell: uniform initial ego speed and a
    single uniform inter-vehicle spacing applied to every adjacent pair,
    leaders cruising at the fixed speed, the follower one spacing behind."""
    n, decel, _mode, p_v = cell
    v0 = float(rng.uniform(*sweep.v0_range))
    dp = float(rng.uniform(*sweep.dp_range))
    f_connected = bool(rng.random() < sweep.follower_connected_prob)
    f_aggressive = bool(rng.random() < sweep.follower_aggressive_prob)
    if dp < sweep.geometry.p_m:
        raise GapTooSmall(f"sampled spacing {dp:.3f} below p_m")

    w_l = sweep.geometry.w_l
    promise = ConnectivityPromise(a_m_d=sweep.a_m_d, a_m_a=DEFAULT_A_M_A)
    surroundings = []
    for i in range(1, n + 2):
        connected = i <= n
        surroundings.append(SurroundingVehicle(
            state=VehicleState(p_x=i * dp, v_x=sweep.v_leaders, p_y=w_l),
            connected=connected,
            promise=promise if connected else None,
            role=ROLE_LEADER, index=i))
    surroundings.append(SurroundingVehicle(
        state=VehicleState(p_x=-dp, v_x=sweep.v_leaders, p_y=w_l),
        connected=f_connected,
        promise=None,
        role=ROLE_FOLLOWER,
        nature=None if f_connected else
        (NATURE_AGGRESSIVE if f_aggressive else NATURE_COLLABORATIVE)))

    return ScenarioConfig(
        ego=VehicleState(p_x=0.0, v_x=v0),
        surroundings=tuple(surroundings),
        limits=sweep.limits,
        geometry=sweep.geometry,
        n_connected_leaders=n,
        event=EventSpec(trigger_time=sweep.trigger_time, decel=decel),
        p_v=p_v,
        dt=sweep.dt,
        horizon=sweep.horizon)


def _trial_entropy(sweep_seed: int, cell: tuple[int, float, str, float],
                   trial: int) -> list[int]:
    n, decel, _mode, p_v = cell
    # the mode is deliberately excluded: all four modes see paired worlds
    return [sweep_seed, n, int(round(decel * 1000)), int(round(p_v * 1e6)), trial]


def run_cell(sweep: SweepConfig, cell: tuple[int, float, str, float],
             spec: PlannerSpec | None = None,
             formula: str = FORMULA_CERTIFIED) -> SweepRow:
    """Run every trial of one grid cell and aggregate."""
    spec = spec or PlannerSpec()
    n, decel, mode, p_v = cell
    results = []
    for trial in range(sweep.trials_per_cell):
        root = np.random.SeedSequence(_trial_entropy(sweep.seed, cell, trial))
        scenario_ss, trial_ss = root.spawn(2)
        rng = np.random.default_rng(scenario_ss)
        cfg = sample_scenario(rng, sweep, cell)
        seed = int(trial_ss.generate_state(1)[0])
        results.append(run_trial(cfg, mode, spec, seed, formula=formula))
    return aggregate_cell(cell, results)


def aggregate_cell(cell: tuple[int, float, str, float],
                   results: list[TrialResult]) -> SweepRow:
    """Order-independent fold of per-trial outcomes into one row."""
    n, decel, mode, p_v = cell
    trials = len(results)
    successes = sum(1 for r in results if r.success)
    collisions = sum(1 for r in results if r.collision)
    times = sorted(r.completion_time for r in results
                   if r.completion_time is not None)
    mean_t = sum(times) / len(times) if times else float("nan")
    return SweepRow(n_connected=n, decel=decel, planner_mode=mode, p_v=p_v,
                    trials=trials, successes=successes, collisions=collisions,
                    success_rate=successes / trials,
                    collision_rate=collisions / trials,
                    mean_completion_time=mean_t)


def _run_cell_task(args) -> tuple[int, SweepRow]:
    idx, sweep, cell, spec, formula = args
    return idx, run_cell(sweep, cell, spec, formula)


def run_sweep(sweep: SweepConfig, parallelism: int = 1,
              spec: PlannerSpec | None = None,
              formula: str = FORMULA_CERTIFIED) -> list[SweepRow]:
    """Run the whole grid; row order equals grid order and results do not
    depend on the parallelism degree."""
    sweep.check()
    spec = spec or PlannerSpec()
    cells = sweep.cells()
    if parallelism <= 1:
        return [run_cell(sweep, cell, spec, formula) for cell in cells]
    payloads = [(i, sweep, cell, spec, formula) for i, cell in enumerate(cells)]
    rows: list[SweepRow | None] = [None] * len(cells)
    with ProcessPoolExecutor(max_workers=parallelism) as pool:
        for idx, row in pool.map(_run_cell_task, payloads):
            rows[idx] = row
    return rows  # type: ignore[return-value]


def _fmt_num(x: float) -> str:
    return f"{x:g}"


def format_results(rows: list[SweepRow]) -> str:
    if not rows:
        raise EmptyResults("no sweep rows to write")
    lines = [RESULTS_HEADER]
    for r in rows:
        mean = f"{r.mean_completion_time:.4f}"
        lines.append(",".join([
            str(r.n_connected), _fmt_num(r.decel), r.planner_mode,
            _fmt_num(r.p_v), str(r.trials), str(r.successes),
            str(r.collisions), f"{r.success_rate:.4f}",
            f"{r.collision_rate:.4f}", mean]))
    return "\n".join(lines) + "\n"


def write_results(rows: list[SweepRow], path: str) -> None:
    """CSV emission; byte-identical across runs with equal inputs."""
    text = format_results(rows)
    with open(path, "w", newline="") as f:
        f.write(text)


# --- sweep config file ------------------------------------------------------

def sweep_from_dict(d: dict) -> SweepConfig:
    kwargs = {}
    simple = {"trials_per_cell": int, "seed": int, "a_m_d": float,
              "v_leaders": float, "follower_connected_prob": float,
              "follower_aggressive_prob": float, "trigger_time": float,
              "dt": float, "horizon": float}
    for key, cast in simple.items():
        if key in d:
            kwargs[key] = cast(d[key])
    if "n_values" in d:
        kwargs["n_values"] = tuple(int(x) for x in d["n_values"])
    if "decel_values" in d:
        kwargs["decel_values"] = tuple(float(x) for x in d["decel_values"])
    if "modes" in d:
        kwargs["modes"] = tuple(str(x) for x in d["modes"])
    if "p_v_values" in d:
        kwargs["p_v_values"] = tuple(float(x) for x in d["p_v_values"])
    for key in ("v0_range", "dp_range"):
        if key in d:
            lo, hi = d[key]
            kwargs[key] = (float(lo), float(hi))
    if "limits" in d:
        L = d["limits"]
        kwargs["limits"] = MechanicalLimits(
            a_x_d=float(L.get("a_x_d", MechanicalLimits().a_x_d)),
            a_x_a=float(L.get("a_x_a", MechanicalLimits().a_x_a)),
            a_y_m=float(L.get("a_y_m", MechanicalLimits().a_y_m)))
    if "geometry" in d:
        g = d["geometry"]
        base = LaneGeometry()
        kwargs["geometry"] = LaneGeometry(
            w_l=float(g.get("w_l", base.w_l)), w_v=float(g.get("w_v", base.w_v)),
            l_v=float(g.get("l_v", base.l_v)), p_m=float(g.get("p_m", base.p_m)))
    return SweepConfig(**kwargs)


def load_sweep_config(path: str) -> SweepConfig:
    with open(path) as f:
        return sweep_from_dict(json.load(f))
