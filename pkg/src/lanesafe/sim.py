"""Discrete-time multi-vehicle simulation of one lane-change trial.

One trial is an isolated mutable world advanced by a single loop: event
injection on the non-connected leader, promise-keeping leader policies with
violation draws, the follower policy, information masking for the chosen
planner mode, per-step behaviour arbitration, exact kinematic integration,
and collision/success detection.  Everything is deterministic given
(scenario, mode, planner, seed).
"""
from __future__ import annotations

import csv
from collections import deque
from dataclasses import dataclass

import numpy as np

from . import behaviors
from .behaviors import (LABEL_AGGRESSIVE, LABEL_COLLABORATIVE, LABEL_UNKNOWN,
                        assess_aggressiveness, collapse_label, ego_in_conflict,
                        follower_policy, leader_policy)
from .decision import (BEHAVIOR_ABORT, BEHAVIOR_PROCEED, Decision,
                       advance_along_plan, decide_step, step_state)
from .evasion import EvasionCheck, lateral_evasion
from .planner import Observation, PlannerSpec, plan
from .types import (ConnectivityPromise, LaneGeometry, MechanicalLimits,
                    ScenarioConfig, VehicleState, validate_scenario)
from .worst_case import FORMULA_CERTIFIED, propagate_chain

MODE_CV_ALL = "CV_all"
MODE_CV_FOLLOW = "CV_follow"
MODE_CV_NONE = "CV_none"
MODE_NO_AGG = "No_agg_assess"
MODES = (MODE_CV_ALL, MODE_CV_FOLLOW, MODE_CV_NONE, MODE_NO_AGG)

DIRECTIVE_CONNECTED = "connected_collaborative"
DIRECTIVE_ASSESS = "assess"
DIRECTIVE_AGGRESSIVE = "always_aggressive"

TRAJECTORY_HEADER = ["t", "vehicle_id", "p_x", "v_x", "p_y", "v_y",
                     "a_x", "a_y", "behavior"]


def step_kinematics(state: VehicleState, a_x: float, a_y: float,
                    dt: float) -> VehicleState:
    """Exact constant-acceleration update; v_x clamps at zero with the
    position integrated piecewise through the stop instant, lateral motion
    unclamped."""
    return step_state(state, a_x, a_y, dt)


@dataclass(frozen=True, slots=True)
class MaskedView:
    """What the safety layer may use under a given planner mode."""

    leader_states: tuple[VehicleState, ...]
    leader_promises: tuple[ConnectivityPromise | None, ...]
    chain_event_decel: float
    follower_state: VehicleState | None
    follower_directive: str


def mask_observation(mode: str, lead_states: list[VehicleState],
                     lead_promises: list[ConnectivityPromise | None],
                     follower_state: VehicleState | None,
                     follower_connected: bool, event_decel: float,
                     limits: MechanicalLimits) -> MaskedView:
    """Information masking per planner mode.

    CV_all sees every promise and runs the full chain; CV_follow and
    CV_none collapse the chain to the mechanical worst case of L_1;
    CV_follow and CV_all honour the follower's connectivity while CV_none
    must assess it; No_agg_assess forces the aggressive assumption.
    """
    if mode not in MODES:
        raise ValueError(f"unknown planner mode {mode!r}")
    if mode == MODE_CV_ALL:
        leaders = tuple(lead_states)
        promises = tuple(lead_promises)
        chain_seed = event_decel
    else:
        leaders = (lead_states[0],)
        promises = (None,)
        chain_seed = limits.a_x_d
    if mode in (MODE_CV_ALL, MODE_CV_FOLLOW):
        directive = DIRECTIVE_CONNECTED if follower_connected else DIRECTIVE_ASSESS
    elif mode == MODE_CV_NONE:
        directive = DIRECTIVE_ASSESS
    else:
        directive = DIRECTIVE_AGGRESSIVE
    return MaskedView(leaders, promises, chain_seed, follower_state, directive)


def detect_collision(states: list[VehicleState], geometry: LaneGeometry) -> bool:
    """True iff any two axis-aligned vehicle rectangles (l_v x w_v) overlap."""
    l_v, w_v = geometry.l_v, geometry.w_v
    n = len(states)
    for i in range(n):
        si = states[i]
        for j in range(i + 1, n):
            sj = states[j]
            if abs(si.p_x - sj.p_x) < l_v and abs(si.p_y - sj.p_y) < w_v:
                return True
    return False


def check_success(ego_trajectory: list[tuple[float, float]],
                  geometry: LaneGeometry,
                  horizon: float) -> tuple[bool, float | None]:
    """Success iff the ego's lateral center crosses the lane border w_l/2
    within the horizon and is still across it at the end (a vehicle that
    retreats to the original lane after touching the border has not changed
    lanes).  The completion time is the first crossing instant, linearly
    interpolated between samples."""
    border = 0.5 * geometry.w_l
    completion = None
    last_y = ego_trajectory[0][1] if ego_trajectory else 0.0
    for (t0, y0), (t1, y1) in zip(ego_trajectory, ego_trajectory[1:]):
        if t1 > horizon + 1e-9:
            break
        last_y = y1
        if completion is None and y0 < border <= y1:
            frac = (border - y0) / (y1 - y0) if y1 != y0 else 0.0
            completion = t0 + frac * (t1 - t0)
    if completion is not None and last_y >= border:
        return True, completion
    return False, None


@dataclass(frozen=True, slots=True)
class TrialResult:
    success: bool
    collision: bool
    completion_time: float | None
    abort_count: int
    trajectory: list[dict] | None = None
    audit: list[dict] | None = None


def run_trial(cfg: ScenarioConfig, mode: str, spec: PlannerSpec, seed: int,
              record_trajectory: bool = False, record_audit: bool = False,
              formula: str = FORMULA_CERTIFIED, strict_follower: bool = True,
              allow_reattempt: bool = False,
              hesitate_budget: float = 3.0) -> TrialResult:
    """Run one full trial; deterministic given (cfg, mode, spec, seed).

    ``allow_reattempt`` re-enables Proceed after an abort has completed;
    ``hesitate_budget`` caps the total time spent hesitating per trial
    (hovering between lanes is a transient wait for a safe window, not a
    place to live; when the budget is spent the ego escalates to Abort).
    """
    cfg = validate_scenario(cfg)
    spec.check()
    limits, geometry = cfg.limits, cfg.geometry
    dt = cfg.dt
    # positions are vehicle centers, so a p_m bumper gap between rectangles
    # means keeping p_m + l_v between position points everywhere
    p_m = geometry.center_margin
    n_steps = int(round(cfg.horizon / dt))

    leaders = cfg.leaders
    lead_states = [s.state for s in leaders]
    lead_promises = [s.promise for s in leaders]
    fol = cfg.follower
    fol_state = fol.state if fol is not None else None
    fol_nature = None
    if fol is not None:
        fol_nature = LABEL_COLLABORATIVE if fol.connected else \
            (fol.nature or LABEL_AGGRESSIVE)
    ego = cfg.ego

    # independent per-vehicle randomness, derived from the trial seed
    rngs = [np.random.default_rng(np.random.SeedSequence([seed, 100 + i]))
            for i in range(len(lead_states))]

    previous_plan = EvasionCheck(
        True,
        lateral_evasion(ego.p_y, ego.v_y, geometry, limits.a_y_m),
        None, None)
    plan_elapsed = 0.0
    proceed_allowed = True
    hesitate_left = hesitate_budget
    believed = LABEL_UNKNOWN
    window_steps = max(1, int(round(behaviors.DEFAULT_ASSESS_WINDOW / dt)))
    history: deque[tuple[float, float]] = deque(maxlen=window_steps)

    ego_y_path = [(0.0, ego.p_y)]
    crossed = False
    completion = None
    collision = False
    abort_count = 0
    prev_behavior = None
    last_ego_ax = 0.0
    last_l1_ax = 0.0  # the planner sees the leader's last observed accel
    trajectory: list[dict] | None = [] if record_trajectory else None
    audit_rows: list[dict] | None = [] if record_audit else None

    for k in range(n_steps):
        t = k * dt
        n_lead = len(lead_states)
        accels = [0.0] * n_lead

        # emergency event on the non-connected leader: brake until stopped
        if t >= cfg.event.trigger_time - 1e-9 and lead_states[-1].v_x > 0.0:
            accels[-1] = -cfg.event.decel

        # violation bounds come from the chain computed on the true world
        z_by_leader = None
        if cfg.p_v > 0.0:
            truth = propagate_chain(lead_states, lead_promises,
                                    cfg.event.decel, p_m, limits, formula,
                                    clamp_infeasible=True)
            z_by_leader = list(reversed(truth.required))

        # leader policies, front to back
        for i in range(n_lead - 2, -1, -1):
            a, _ = leader_policy(
                lead_states[i], lead_states[i + 1], accels[i + 1],
                lead_promises[i], rngs[i], cfg.p_v,
                z_by_leader[i] if z_by_leader is not None else 0.0,
                cfg.event.decel, p_m, limits)
            accels[i] = a

        # follower policy; the conflict ends once the ego sits fully inside
        # the target lane (the follower then just car-follows it).  The
        # self-preservation guard always covers the lane leader L_1 and the
        # ego whenever it occupies the lane ahead of the follower.
        fol_a = 0.0
        fol_regime = ""
        fol_forced = 0.0
        if fol_state is not None:
            ego_in_lane = ego_in_conflict(ego, geometry, limits.a_y_m)
            conflict = ego_in_lane and ego.p_y < geometry.y_settled
            fronts = [(lead_states[0], accels[0])]
            if ego_in_lane and ego.p_x > fol_state.p_x:
                fronts.append((ego, last_ego_ax))
            fol_forced = behaviors.forced_deceleration(fol_state, fronts,
                                                       p_m, limits)
            primary = ego if (ego_in_lane and ego.p_x > fol_state.p_x
                              and ego.p_x < lead_states[0].p_x) else lead_states[0]
            fol_a, fol_regime = follower_policy(
                fol_nature, fol is not None and fol.connected, conflict,
                fol_state, primary, fol_forced, limits)

        # ego: mask, plan, decide
        view = mask_observation(mode, lead_states, lead_promises, fol_state,
                                fol is not None and fol.connected,
                                cfg.event.decel, limits)
        if view.follower_directive == DIRECTIVE_CONNECTED:
            follower_model = LABEL_COLLABORATIVE
        elif view.follower_directive == DIRECTIVE_AGGRESSIVE:
            follower_model = LABEL_AGGRESSIVE
        else:
            follower_model = collapse_label(believed)
        if fol_state is None:
            follower_model = None

        obs = Observation(ego, lead_states[0], fol_state, dt,
                          leader_accel=last_l1_ax)
        cmd = plan(spec, obs, limits, geometry)

        decision, audit = decide_step(
            ego, list(view.leader_states), list(view.leader_promises),
            view.follower_state, follower_model, cmd, previous_plan,
            plan_elapsed, dt, limits, geometry, view.chain_event_decel,
            formula, strict_follower, allow_proceed=proceed_allowed,
            allow_hesitate=hesitate_left >= dt - 1e-12,
            evaluate_all=record_audit, margin=p_m)

        if trajectory is not None:
            trajectory.append({"t": t, "vehicle_id": "ego",
                               "p_x": ego.p_x, "v_x": ego.v_x,
                               "p_y": ego.p_y, "v_y": ego.v_y,
                               "a_x": decision.command[0],
                               "a_y": decision.command[1],
                               "behavior": decision.behavior})
            for i, (s, a) in enumerate(zip(lead_states, accels)):
                trajectory.append({"t": t, "vehicle_id": f"L{i + 1}",
                                   "p_x": s.p_x, "v_x": s.v_x,
                                   "p_y": s.p_y, "v_y": s.v_y,
                                   "a_x": a, "a_y": 0.0, "behavior": "follow"})
            if fol_state is not None:
                trajectory.append({"t": t, "vehicle_id": "F",
                                   "p_x": fol_state.p_x, "v_x": fol_state.v_x,
                                   "p_y": fol_state.p_y, "v_y": fol_state.v_y,
                                   "a_x": fol_a, "a_y": 0.0,
                                   "behavior": fol_regime})
        if audit_rows is not None:
            audit_rows.append(audit)

        # integrate the ego
        if decision.behavior == BEHAVIOR_ABORT and \
                plan_elapsed <= previous_plan.lateral.t_y_f + 1e-9:
            ego = advance_along_plan(ego, previous_plan, plan_elapsed, dt)
        else:
            ego = step_kinematics(ego, decision.command[0],
                                  decision.command[1], dt)
        last_ego_ax = decision.command[0]

        # integrate the surroundings
        prev_fol_v = fol_state.v_x if fol_state is not None else 0.0
        lead_states = [step_kinematics(s, a, 0.0, dt)
                       for s, a in zip(lead_states, accels)]
        if fol_state is not None:
            fol_state = step_kinematics(fol_state, fol_a, 0.0, dt)

        # plan bookkeeping
        if decision.behavior == BEHAVIOR_ABORT:
            plan_elapsed += dt
            if prev_behavior != BEHAVIOR_ABORT:
                abort_count += 1
                if not allow_reattempt:
                    proceed_allowed = False
        else:
            # hovering between lanes is a bounded wait; holding position
            # when already settled in the target lane is ordinary driving
            if decision.behavior != BEHAVIOR_PROCEED and \
                    ego.p_y < geometry.y_settled:
                hesitate_left -= dt
            previous_plan = decision.certified_plan
            plan_elapsed = 0.0
        prev_behavior = decision.behavior

        # follower assessment history: observed acceleration, gap, and how
        # much braking the follower's own safety forced on it (so forced
        # braking never reads as cooperation); aggressive evidence latches
        if fol_state is not None:
            observed_a = (fol_state.v_x - prev_fol_v) / dt
            history.append((observed_a, ego.p_x - fol_state.p_x, fol_forced))
            lab = assess_aggressiveness(history)
            if lab == LABEL_AGGRESSIVE:
                believed = LABEL_AGGRESSIVE
            elif lab == LABEL_COLLABORATIVE and believed != LABEL_AGGRESSIVE:
                believed = LABEL_COLLABORATIVE

        # success and collision tracking
        t_next = (k + 1) * dt
        ego_y_path.append((t_next, ego.p_y))
        if not crossed:
            y0 = ego_y_path[-2][1]
            border = 0.5 * geometry.w_l
            if y0 < border <= ego.p_y:
                crossed = True
                frac = (border - y0) / (ego.p_y - y0)
                completion = t + frac * dt
        everyone = [ego] + lead_states + ([fol_state] if fol_state is not None else [])
        if detect_collision(everyone, geometry):
            collision = True
            break
        # the maneuver ends once the ego sits fully inside the target lane
        # with no lateral motion; subsequent plain car-following is outside
        # the lane-change experiment
        if crossed and ego.p_y >= geometry.y_settled and abs(ego.v_y) <= 0.1:
            break

    # "finally crosses": the ego must end across the border, not merely
    # have touched it before retreating
    success = crossed and not collision and ego.p_y >= 0.5 * geometry.w_l
    return TrialResult(success=success, collision=collision,
                       completion_time=completion if success else None,
                       abort_count=abort_count,
                       trajectory=trajectory, audit=audit_rows)


def write_trajectory(rows: list[dict], path: str) -> None:
    """Dump a recorded trajectory as CSV."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(TRAJECTORY_HEADER)
        for r in rows:
            w.writerow([f"{r['t']:.6f}", r["vehicle_id"],
                        f"{r['p_x']:.6f}", f"{r['v_x']:.6f}",
                        f"{r['p_y']:.6f}", f"{r['v_y']:.6f}",
                        f"{r['a_x']:.6f}", f"{r['a_y']:.6f}",
                        r["behavior"]])
