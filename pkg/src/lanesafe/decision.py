"""Per-step behaviour arbitration: Proceed, Hesitate, Abort.

Each control period the ego tries its options in strictly decreasing
preference.  Proceed and Hesitate are gated by a one-step rollout followed
by a fresh evasion-existence certificate from the post-step state; Abort
needs no new certificate because it executes the evasion plan certified on
a previous step.  Rollouts move the surroundings to their worst-case
one-step positions (leaders brake at their chain deceleration, the follower
accelerates at the mechanical limit), so any actual evolution within the
modeled envelopes leaves the world no more dangerous than certified.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import PlanExhausted
from .evasion import EvasionCheck, evasion_exists
from .kinematics import advance
from .types import (ConnectivityPromise, LaneGeometry, MechanicalLimits,
                    VehicleState)
from .worst_case import FORMULA_CERTIFIED, propagate_chain

BEHAVIOR_PROCEED = "proceed"
BEHAVIOR_HESITATE = "hesitate"
BEHAVIOR_ABORT = "abort"

_EPS = 1e-9


@dataclass(frozen=True, slots=True)
class Decision:
    """One arbitration outcome: the behaviour, the acceleration command to
    execute this step, and the evasion certified from the post-step state
    (for Abort: the carried previous plan)."""

    behavior: str
    command: tuple[float, float]
    certified_plan: EvasionCheck


def step_state(state: VehicleState, a_x: float, a_y: float,
               dt: float) -> VehicleState:
    """Exact one-step double-integrator update; longitudinal motion clamps
    at standstill, lateral motion is unconstrained."""
    p_x, v_x = advance(state.p_x, state.v_x, a_x, dt)
    return VehicleState(p_x=p_x, v_x=v_x,
                        p_y=state.p_y + state.v_y * dt + 0.5 * a_y * dt * dt,
                        v_y=state.v_y + a_y * dt)


def hesitate_action(ego: VehicleState, limits: MechanicalLimits,
                    previous_plan: EvasionCheck | None = None,
                    plan_elapsed: float = 0.0,
                    dt: float = 0.1) -> tuple[float, float]:
    """Hold the current lateral position: drive v_y to zero without
    overshooting within the step; longitudinally track the certified
    evasion's profile (the planner's longitudinal command was just
    rejected)."""
    if abs(ego.v_y) <= _EPS:
        a_y = 0.0
    else:
        a_y = -math.copysign(min(limits.a_y_m, abs(ego.v_y) / dt), ego.v_y)
    a_x = 0.0
    if previous_plan is not None and previous_plan.longitudinal is not None:
        if plan_elapsed <= previous_plan.lateral.t_y_f + _EPS:
            a_x = previous_plan.longitudinal.accel(plan_elapsed)
    return a_x, a_y


def abort_action(previous_plan: EvasionCheck,
                 elapsed: float) -> tuple[float, float]:
    """The (a_x, a_y) of the stored evasion plan at the given offset:
    lateral bang-bang, longitudinal three-phase profile."""
    lat = previous_plan.lateral
    if elapsed > lat.t_y_f + _EPS:
        raise PlanExhausted(
            f"evasion plan covers [0, {lat.t_y_f:.3f}] s, asked at {elapsed:.3f} s")
    a_y = lat.accel(elapsed)
    lon = previous_plan.longitudinal
    a_x = lon.accel(elapsed) if lon is not None else 0.0
    return a_x, a_y


def advance_along_plan(ego: VehicleState, plan: EvasionCheck,
                       elapsed: float, dt: float) -> VehicleState:
    """Advance the ego exactly along the stored plan over
    [elapsed, elapsed+dt], splitting the step at the plan's internal switch
    instants so the executed trajectory is the certified one to machine
    precision."""
    cuts = {elapsed + dt}
    lat, lon = plan.lateral, plan.longitudinal
    marks = [lat.t_1, lat.t_y_f]
    if lon is not None:
        marks += [lon.t_x_1, lon.tau_1, lon.tau_2]
    for m in marks:
        if elapsed < m < elapsed + dt:
            cuts.add(m)
    t = elapsed
    state = ego
    for b in sorted(cuts):
        a_y = lat.accel(t) if t <= lat.t_y_f else 0.0
        a_x = lon.accel(t) if lon is not None else 0.0
        state = step_state(state, a_x, a_y, b - t)
        t = b
    return state


def _roll_surroundings(leader_states: list[VehicleState],
                       worst_decels: list[float],
                       follower: VehicleState | None,
                       limits: MechanicalLimits,
                       dt: float) -> tuple[list[VehicleState], VehicleState | None]:
    rolled = []
    for s, d in zip(leader_states, worst_decels):
        p, v = advance(s.p_x, s.v_x, -d, dt)
        rolled.append(VehicleState(p_x=p, v_x=v, p_y=s.p_y, v_y=s.v_y))
    rf = None
    if follower is not None:
        p, v = advance(follower.p_x, follower.v_x, limits.a_x_a, dt)
        rf = VehicleState(p_x=p, v_x=v, p_y=follower.p_y, v_y=follower.v_y)
    return rolled, rf


def decide_step(ego: VehicleState,
                leader_states: list[VehicleState],
                leader_promises: list[ConnectivityPromise | None],
                follower: VehicleState | None,
                follower_model: str | None,
                planner_command: tuple[float, float],
                previous_plan: EvasionCheck,
                plan_elapsed: float,
                dt: float,
                limits: MechanicalLimits,
                geometry: LaneGeometry,
                chain_event_decel: float,
                formula: str = FORMULA_CERTIFIED,
                strict_follower: bool = True,
                allow_proceed: bool = True,
                allow_hesitate: bool = True,
                evaluate_all: bool = False,
                margin: float | None = None) -> tuple[Decision, dict]:
    """Try Proceed, then Hesitate, then Abort; return the first available
    candidate whose post-rollout evasion certificate exists.

    ``leader_states``/``leader_promises`` are the masked view L_1.., and
    ``chain_event_decel`` seeds the masked worst-case chain.  Abort never
    needs a certificate: its command is the next segment of the previous
    plan, or plain car-following once that plan is exhausted with the ego
    back inside its lane.  ``allow_proceed``/``allow_hesitate`` let the
    caller withdraw candidates (re-attempt lockout, hesitation budget).
    The returned audit record notes availability and which candidates held
    certificates (all candidates are certified only when ``evaluate_all``
    is set).
    """
    p_m = geometry.p_m if margin is None else margin
    chain_now = propagate_chain(leader_states, leader_promises,
                                chain_event_decel, p_m, limits,
                                formula, clamp_infeasible=True)
    worst = list(reversed(chain_now.decels))  # L_1-first order
    rolled_leaders, rolled_follower = _roll_surroundings(
        leader_states, worst, follower, limits, dt)
    chain1 = propagate_chain(rolled_leaders, leader_promises,
                             chain_event_decel, p_m, limits,
                             formula, clamp_infeasible=True)

    def certify(cmd: tuple[float, float]) -> EvasionCheck:
        ego1 = step_state(ego, cmd[0], cmd[1], dt)
        return evasion_exists(ego1, rolled_leaders[0], rolled_follower,
                              chain1, follower_model, geometry, limits,
                              strict_follower, margin=p_m)

    audit = {"behavior": None, "proceed_allowed": allow_proceed,
             "hesitate_allowed": allow_hesitate, "proceed_certified": None,
             "hesitate_certified": None, "abort_valid": True}
    decision = None

    if allow_proceed or evaluate_all:
        chk = certify(planner_command)
        audit["proceed_certified"] = chk.exists
        if chk.exists and allow_proceed:
            decision = Decision(BEHAVIOR_PROCEED, planner_command, chk)
            if not evaluate_all:
                audit["behavior"] = decision.behavior
                return decision, audit

    if (allow_hesitate or evaluate_all) and (decision is None or evaluate_all):
        h_cmd = hesitate_action(ego, limits, previous_plan, plan_elapsed, dt)
        chk = certify(h_cmd)
        audit["hesitate_certified"] = chk.exists
        if chk.exists and allow_hesitate and decision is None:
            decision = Decision(BEHAVIOR_HESITATE, h_cmd, chk)
            if not evaluate_all:
                audit["behavior"] = decision.behavior
                return decision, audit

    audit["abort_valid"] = (
        plan_elapsed <= previous_plan.lateral.t_y_f + _EPS
        or (ego.p_y <= geometry.y_retreat + 1e-6))
    if decision is None:
        try:
            cmd = abort_action(previous_plan, plan_elapsed)
        except PlanExhausted:
            # plan fully executed and the ego is back in its lane: normal
            # car-following (the original lane ahead is empty)
            cmd = hesitate_action(ego, limits, None, 0.0, dt)
            cmd = (0.0, cmd[1])
        decision = Decision(BEHAVIOR_ABORT, cmd, previous_plan)
    audit["behavior"] = decision.behavior
    return decision, audit
