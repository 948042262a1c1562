"""Surrounding-vehicle behaviour: promise-keeping leaders with the emergency
override, stochastic promise violation, follower policies, and the
aggressiveness assessment used when the follower is not connected.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .errors import Infeasible
from .types import (ConnectivityPromise, LaneGeometry, MechanicalLimits,
                    VehicleState, NATURE_AGGRESSIVE, NATURE_COLLABORATIVE)
from .worst_case import required_decel

LABEL_AGGRESSIVE = NATURE_AGGRESSIVE
LABEL_COLLABORATIVE = NATURE_COLLABORATIVE
LABEL_UNKNOWN = "unknown"

REGIME_PROMISE = "promise"
REGIME_EXPECTED = "expected_violation"
REGIME_UNEXPECTED = "unexpected_violation"
REGIME_YIELD = "yield"
REGIME_BLOCK = "block"
REGIME_GUARD = "guard"
REGIME_CRUISE = "cruise"

# background car-following: relaxation toward the front vehicle's speed
_RELAX_GAIN = 0.5
# start braking once the required constant deceleration exceeds this
_GUARD_DECEL = 0.3

DEFAULT_ASSESS_THETA = 0.3     # m/s^2
DEFAULT_ASSESS_WINDOW = 1.0    # s


def collapse_label(label: str | None) -> str:
    """An unknown follower is treated as aggressive at decision time."""
    if label == LABEL_COLLABORATIVE:
        return LABEL_COLLABORATIVE
    return LABEL_AGGRESSIVE


@dataclass(frozen=True, slots=True)
class ViolationModel:
    """Per-step unexpected promise violation: with probability p_v the
    vehicle brakes at a magnitude drawn uniformly from [lower, upper]."""

    p_v: float
    lower: float
    upper: float


def sample_promise_violation(rng, p_v: float, lower: float,
                             upper: float) -> float | None:
    """None with probability 1 - p_v, otherwise a uniform draw in
    [lower, upper] (bounds reordered if needed)."""
    if rng.random() >= p_v:
        return None
    lo, hi = (lower, upper) if lower <= upper else (upper, lower)
    return float(rng.uniform(lo, hi))


def _needed_brake(front: VehicleState, me: VehicleState, front_accel: float,
                  p_m: float, limits: MechanicalLimits) -> float:
    """Constant deceleration this vehicle needs to keep p_m behind its front
    vehicle, given the front's current braking; the mechanical limit when
    even that cannot hold the margin."""
    front_decel = -front_accel if front_accel < 0.0 else 0.0
    # fast path: the front is not braking and not slower, so the gap cannot
    # shrink and nothing is required
    if front_decel == 0.0 and front.v_x >= me.v_x:
        return 0.0
    try:
        return required_decel(front, me, front_decel, p_m, limits.a_x_d)
    except Infeasible:
        return limits.a_x_d


def leader_policy(me: VehicleState, front: VehicleState, front_accel: float,
                  promise: ConnectivityPromise, rng, p_v: float,
                  violation_lower: float, violation_upper: float,
                  p_m: float, limits: MechanicalLimits) -> tuple[float, str]:
    """Acceleration of a connected leader this control period.

    Nominal car-following clipped to the promised band; braking harder only
    when the clipped action would let the gap to the front vehicle fall
    below p_m (the expected violation); independently, with probability p_v
    the promise is violated unexpectedly with a uniform deceleration draw.
    """
    nominal = _RELAX_GAIN * (front.v_x - me.v_x)
    if nominal < -promise.a_m_d:
        nominal = -promise.a_m_d
    elif nominal > promise.a_m_a:
        nominal = promise.a_m_a
    needed = _needed_brake(front, me, front_accel, p_m, limits)
    if needed > promise.a_m_d:
        a, regime = -min(needed, limits.a_x_d), REGIME_EXPECTED
    else:
        a, regime = nominal, REGIME_PROMISE
    if p_v > 0.0:
        draw = sample_promise_violation(rng, p_v, violation_lower, violation_upper)
        if draw is not None:
            a, regime = -draw, REGIME_UNEXPECTED
    return a, regime


def forced_deceleration(me: VehicleState,
                        fronts: Sequence[tuple[VehicleState, float]],
                        p_m: float, limits: MechanicalLimits) -> float:
    """The braking a vehicle needs for its own safety: the largest required
    deceleration over every front vehicle it must not rear-end (its lane
    leader always, plus a lane-changing vehicle overlapping ahead of it)."""
    needed = 0.0
    for front, front_accel in fronts:
        if front.p_x <= me.p_x:
            continue
        z = _needed_brake(front, me, front_accel, p_m, limits)
        if z > needed:
            needed = z
    return needed


def follower_policy(label: str | None, connected: bool, conflict: bool,
                    me: VehicleState, front: VehicleState | None,
                    forced_decel: float,
                    limits: MechanicalLimits) -> tuple[float, str]:
    """Acceleration of the follower this control period.

    A connected follower is collaborative.  While the ego overlaps or
    approaches the target lane, a collaborative follower opens the gap by
    braking hard and an aggressive one closes it by accelerating; the
    self-preservation guard (``forced_decel``, see
    :func:`forced_deceleration`) overrides any desire to accelerate.
    Outside the conflict window: plain car-following with the same guard.
    """
    effective = LABEL_COLLABORATIVE if connected else collapse_label(label)
    if conflict and effective == LABEL_COLLABORATIVE:
        return -limits.a_x_d, REGIME_YIELD
    if forced_decel > _GUARD_DECEL:
        return -min(forced_decel, limits.a_x_d), REGIME_GUARD
    if conflict:
        return limits.a_x_a, REGIME_BLOCK
    if front is not None:
        a = _RELAX_GAIN * (front.v_x - me.v_x)
        return max(-limits.a_x_d, min(a, limits.a_x_a)), REGIME_CRUISE
    return 0.0, REGIME_CRUISE


def ego_in_conflict(ego: VehicleState, geometry: LaneGeometry,
                    a_y_m: float) -> bool:
    """Does the ego overlap the target lane or visibly move toward it?

    True once the edge is past the boundary, once the current outward
    motion would carry it past even under maximal lateral braking, or once
    the vehicle has clearly left its lane center heading outward (which is
    when surrounding drivers start reacting)."""
    y_t = geometry.y_retreat
    if ego.p_y > y_t:
        return True
    if ego.v_y <= 0.0:
        return False
    if ego.p_y + ego.v_y ** 2 / (2.0 * a_y_m) > y_t:
        return True
    return ego.p_y > 0.1 and ego.v_y > 0.1


def assess_aggressiveness(history: Sequence[tuple[float, float] | tuple[float, float, float]],
                          theta: float = DEFAULT_ASSESS_THETA) -> str:
    """Classify the follower from a window of (acceleration, gap[, forced])
    samples.

    Sustained braking with a widening gap reads as collaborative, but only
    when the braking was voluntary: a vehicle braking because its own
    safety demanded it (``forced`` above the threshold) is no evidence of
    cooperation.  Sustained acceleration with a closing gap reads as
    aggressive.  Anything else stays unknown (treated as aggressive
    downstream).
    """
    if not history:
        return LABEL_UNKNOWN
    n = len(history)
    mean_a = sum(s[0] for s in history) / n
    d_gap = history[-1][1] - history[0][1]
    mean_forced = sum(s[2] for s in history if len(s) > 2) / n
    if mean_a <= -theta and d_gap > 0.0 and mean_forced <= theta:
        return LABEL_COLLABORATIVE
    if mean_a >= theta and d_gap < 0.0:
        return LABEL_AGGRESSIVE
    return LABEL_UNKNOWN
