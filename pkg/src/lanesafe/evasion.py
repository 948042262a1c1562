"""Closed-form evasion trajectories and the existence verdict.

An evasion is the certified fallback of the lane-changing vehicle: the
fastest lateral retreat back into the original lane (a bang-bang profile)
paired with the longitudinal profile that stays as far downstream as
possible while never dipping below the safe margin behind the worst-case
leader envelope.  The verdict additionally checks the retreat against the
follower's worst-case envelope.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import EvasionInfeasible
from .kinematics import (Knots, advance, const_accel_knots, braking_knots,
                         eval_knots, min_relative_gap)
from .types import LaneGeometry, MechanicalLimits, VehicleState
from .worst_case import ChainResult, leader_position_at

_EPS = 1e-9
_INF = math.inf

MODEL_AGGRESSIVE = "aggressive"
MODEL_COLLABORATIVE = "collaborative"


# --- lateral retreat --------------------------------------------------------

@dataclass(frozen=True, slots=True)
class LateralPlan:
    """Bang-bang lateral retreat: accelerate at -a_y_m on [0, t_1], then
    +a_y_m on [t_1, t_y_f], ending at y_target with zero lateral velocity.

    Degenerate shapes (already clear, or a stop short of the boundary) keep
    the same two-segment structure with an empty segment.
    """

    t_1: float
    t_y_f: float
    a_y_m: float
    y_target: float
    p_y0: float
    v_y0: float

    def accel(self, t: float) -> float:
        if t < self.t_1:
            return -self.a_y_m
        if t < self.t_y_f:
            return self.a_y_m
        return 0.0

    def state(self, t: float) -> tuple[float, float]:
        """Lateral (position, velocity) at time t >= 0."""
        a = self.a_y_m
        y, v = self.p_y0, self.v_y0
        if t < self.t_1:
            return y + v * t - 0.5 * a * t * t, v - a * t
        y1 = y + v * self.t_1 - 0.5 * a * self.t_1 ** 2
        v1 = v - a * self.t_1
        tau = min(t, self.t_y_f) - self.t_1
        y2 = y1 + v1 * tau + 0.5 * a * tau * tau
        v2 = v1 + a * tau
        if t < self.t_y_f:
            return y2, v2
        return y2, 0.0


def lateral_evasion(p_y: float, v_y: float, geometry: LaneGeometry,
                    a_y_m: float) -> LateralPlan:
    """Fastest retreat to the boundary-clear position (w_l - w_v)/2.

    Solves the two-segment bang-bang boundary problem for the smallest
    non-negative switch/finish times.  Already-clear states return a zero
    plan; a vehicle inside its own lane whose outward motion dies before the
    boundary just brakes laterally (it ends short of the target, which is a
    deeper, equally safe retreat).
    """
    y_t = geometry.y_retreat
    a = a_y_m
    if p_y <= y_t + _EPS and v_y <= _EPS:
        return LateralPlan(0.0, 0.0, a, y_t, p_y, v_y)
    disc = 0.5 * v_y * v_y + a * (p_y - y_t)
    if disc < 0.0:
        # provably impossible for p_y >= y_target; reachable only from below
        assert p_y < y_t, "negative discriminant with p_y at/above the target"
        t_1 = max(v_y, 0.0) / a
        return LateralPlan(t_1, t_1, a, y_t, p_y, v_y)
    t_1 = (v_y + math.sqrt(disc)) / a
    if t_1 <= 0.0:
        # already rushing inward so hard it overshoots below the target even
        # when braking immediately: second segment only
        return LateralPlan(0.0, -v_y / a, a, y_t, p_y, v_y)
    return LateralPlan(t_1, 2.0 * t_1 - v_y / a, a, y_t, p_y, v_y)


# --- longitudinal evasion ---------------------------------------------------

@dataclass(frozen=True, slots=True)
class LongitudinalPlan:
    """Three-phase longitudinal evasion: accelerate at a_x_a on [0, t_x_1],
    brake at a_x_d on [t_x_1, t_x_2], then brake at the leader's worst-case
    rate a_x_1_d from the velocity match until standstill.

    tau_1 is the velocity-match instant, tau_2 the ego stop instant (both may
    lie past t_y_f; then the corresponding phase never starts inside the
    window).  case_id in 1..4 records the in-window shape: 1 = still rolling
    at t_y_f without a match, 2 = stops before t_y_f without a match, 3 =
    matched and still rolling at t_y_f, 4 = matched and stopped by t_y_f.
    """

    t_x_1: float
    t_x_2: float
    tau_1: float
    tau_2: float
    case_id: int
    a_x_1_d: float
    t_y_f: float
    a_x_a: float
    a_x_d: float
    p_x0: float
    v_x0: float
    leader_p: float
    leader_v: float
    knots: tuple[tuple[float, float, float, float], ...]

    def accel(self, t: float) -> float:
        if t < self.t_x_1:
            return self.a_x_a
        if t < min(self.tau_1, self.tau_2):
            return -self.a_x_d
        if t < self.tau_2:
            return -self.a_x_1_d
        return 0.0

    def state(self, t: float) -> tuple[float, float]:
        p, v, _ = eval_knots(list(self.knots), t)
        return p, v


def _profile_knots(p0: float, v0: float, u: float, a_acc: float, a_brk: float,
                   d1: float, v_l: float) -> Knots:
    """Exact knots of the three-phase profile with switch time ``u``."""
    knots: Knots = []
    p, v = p0, v0
    if u > 0.0:
        knots.append((0.0, p, v, a_acc))
        p, v = advance(p, v, a_acc, u)
    # phase 2: brake at a_brk until the velocity match with the leader
    # envelope (if one happens while both still move) or standstill
    t2 = _INF
    if a_brk > d1 + 1e-12:
        t2_cand = (v0 - v_l + (a_acc + a_brk) * u) / (a_brk - d1)
        v2 = v_l - d1 * t2_cand
        if t2_cand >= u - _EPS and v2 > _EPS:
            t2 = max(t2_cand, u)
    if v <= 0.0:
        knots.append((u, p, 0.0, 0.0))
        return knots
    s_stop = u + v / a_brk
    if t2 < s_stop:
        knots.append((u, p, v, -a_brk))
        p, v = advance(p, v, -a_brk, t2 - u)
        if d1 > 0.0:
            knots.append((t2, p, v, -d1))
            p_stop, _ = advance(p, v, -d1, v / d1)
            knots.append((t2 + v / d1, p_stop, 0.0, 0.0))
        else:
            knots.append((t2, p, v, 0.0))  # matched a non-braking leader: cruise
    else:
        knots.append((u, p, v, -a_brk))
        p_stop, _ = advance(p, v, -a_brk, v / a_brk)
        knots.append((s_stop, p_stop, 0.0, 0.0))
    return knots


def _leader_knots(leader: VehicleState, d1: float) -> Knots:
    return braking_knots(leader.p_x, leader.v_x, d1)


def _min_gap_for_switch(u: float, ego: VehicleState, leader: VehicleState,
                        d1: float, limits: MechanicalLimits, t_y_f: float) -> float:
    ego_k = _profile_knots(ego.p_x, ego.v_x, u, limits.a_x_a, limits.a_x_d,
                           d1, leader.v_x)
    return min_relative_gap(_leader_knots(leader, d1), ego_k, t_y_f)


def _bisect_switch(ego: VehicleState, leader: VehicleState, d1: float,
                   limits: MechanicalLimits, p_m: float, t_y_f: float) -> float:
    """Largest switch time in [0, t_y_f] keeping the exact gap above p_m."""
    if _min_gap_for_switch(0.0, ego, leader, d1, limits, t_y_f) < p_m - 1e-7:
        raise EvasionInfeasible(
            "margin violated even when braking hard from t=0")
    if _min_gap_for_switch(t_y_f, ego, leader, d1, limits, t_y_f) >= p_m - _EPS:
        return t_y_f
    lo, hi = 0.0, t_y_f
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if _min_gap_for_switch(mid, ego, leader, d1, limits, t_y_f) >= p_m:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-13:
            break
    return lo


def longitudinal_evasion(ego: VehicleState, leader: VehicleState,
                         a_x_1_d: float, limits: MechanicalLimits,
                         p_m: float, t_y_f: float) -> LongitudinalPlan:
    """Maximal acceleration-phase length such that the three-phase profile
    keeps the gap to the braking leader at or above p_m throughout the
    lateral retreat window [0, t_y_f].

    Four closed-form candidates cover the possible in-window shapes; each is
    kept only if its own applicability condition holds under its value, and
    a monotone bisection against the exact kinematics resolves ambiguous or
    inconsistent outcomes.  A window so benign that even full-throttle
    acceleration keeps the margin yields t_x_1 = t_y_f; a negative solution
    means no profile avoids the margin violation and the evasion is
    infeasible.
    """
    A = limits.a_x_a
    D = limits.a_x_d
    d1 = min(max(a_x_1_d, 0.0), D)
    v0, p0 = ego.v_x, ego.p_x
    v_l, p_l = leader.v_x, leader.p_x
    T = t_y_f
    if p_l - p0 < p_m - 1e-7:
        raise EvasionInfeasible("gap to the leader is already below the margin")

    p_lt = leader_position_at(leader, d1, T)
    inner = T * T + (2.0 * v0 * T - D * T * T + 2.0 * p0 + 2.0 * p_m
                     - 2.0 * p_lt) / (A + D)

    u: float
    if inner <= 0.0:
        # the margin constraint is slack even under full acceleration
        u = T
    else:
        candidates: list[float] = []
        # still rolling at T, no velocity match
        u1 = T - math.sqrt(inner)
        v_end = v0 + A * u1 - D * (T - u1)
        if v_end >= max(0.0, v_l - d1 * T) - 1e-7:
            candidates.append(u1)
        # stops braking at a_x_d before T, leader already stopped
        if d1 > 0.0:
            rad2 = (v0 / A) ** 2 - (2.0 * p0 * D + v0 * v0 + 2.0 * p_m * D
                                    - 2.0 * p_lt * D) / ((A + D) * A)
            if rad2 >= 0.0:
                u2 = -v0 / A + math.sqrt(rad2)
                s2 = u2 + (v0 + A * u2) / D
                if v_l / d1 <= s2 + 1e-7 and s2 <= T + 1e-7:
                    candidates.append(u2)
        # velocity match inside the window (rolling or stopped at T)
        if D > d1 + 1e-12:
            c2 = ((v0 - v_l) ** 2 + (2.0 * p0 + 2.0 * p_m - 2.0 * p_l)
                  * (D - d1)) / (2.0 * (A + D))
            rad34 = (v0 - v_l) ** 2 - 2.0 * (A + d1) * c2
            if rad34 >= 0.0:
                u34 = (-(v0 - v_l) + math.sqrt(rad34)) / (A + d1)
                t2 = (v0 - v_l + (A + D) * u34) / (D - d1)
                v2 = v_l - d1 * t2
                if u34 - 1e-7 <= t2 <= T + 1e-7 and v2 >= -1e-7:
                    candidates.append(u34)

        # de-duplicate numerically identical candidates
        unique: list[float] = []
        for c in candidates:
            if not any(abs(c - q) <= 1e-7 for q in unique):
                unique.append(c)

        if len(unique) == 1:
            u = unique[0]
            if u < -1e-7:
                if _min_gap_for_switch(0.0, ego, leader, d1, limits, T) < p_m - 1e-7:
                    raise EvasionInfeasible(
                        "margin violated even when braking hard from t=0")
                u = _bisect_switch(ego, leader, d1, limits, p_m, T)
            else:
                u = min(max(u, 0.0), T)
                gap = _min_gap_for_switch(u, ego, leader, d1, limits, T)
                if gap < p_m - 1e-6 or gap > p_m + 1e-4:
                    u = _bisect_switch(ego, leader, d1, limits, p_m, T)
        else:
            u = _bisect_switch(ego, leader, d1, limits, p_m, T)

    u = min(max(u, 0.0), T)
    return _finalize_plan(ego, leader, d1, limits, u, T)


def _finalize_plan(ego: VehicleState, leader: VehicleState, d1: float,
                   limits: MechanicalLimits, u: float, T: float) -> LongitudinalPlan:
    A, D = limits.a_x_a, limits.a_x_d
    v0, v_l = ego.v_x, leader.v_x
    v1 = v0 + A * u
    s_stop = u + (v1 / D if v1 > 0.0 else 0.0)
    t2 = _INF
    v2 = 0.0
    if D > d1 + 1e-12:
        t2_cand = (v0 - v_l + (A + D) * u) / (D - d1)
        v2_cand = v_l - d1 * t2_cand
        if t2_cand >= u - _EPS and v2_cand > _EPS:
            t2, v2 = max(t2_cand, u), v2_cand
    if math.isfinite(t2):
        tau_1 = t_x_2 = t2
        tau_2 = t2 + (v2 / d1 if d1 > 0.0 else _INF)
        if t2 > T:  # the match falls past the window: shape 1 in-window
            case_id = 1
        else:
            case_id = 3 if tau_2 >= T else 4
    else:
        tau_1 = tau_2 = t_x_2 = s_stop
        case_id = 1 if s_stop > T else 2
    knots = _profile_knots(ego.p_x, v0, u, A, D, d1, v_l)
    return LongitudinalPlan(
        t_x_1=u, t_x_2=t_x_2, tau_1=tau_1, tau_2=tau_2, case_id=case_id,
        a_x_1_d=d1, t_y_f=T, a_x_a=A, a_x_d=D, p_x0=ego.p_x, v_x0=v0,
        leader_p=leader.p_x, leader_v=v_l,
        knots=tuple(knots))


def ego_position_at(plan: LongitudinalPlan, ego0: VehicleState,
                    leader: VehicleState, t: float) -> float:
    """Ego position under the evasion profile: acceleration phase, braking
    phase, then riding the leader envelope at the margin offset."""
    A, D = plan.a_x_a, plan.a_x_d
    if t <= plan.t_x_1:
        return ego0.p_x + ego0.v_x * t + 0.5 * A * t * t
    if t <= min(plan.tau_1, plan.tau_2, plan.t_y_f):
        u = plan.t_x_1
        p1 = ego0.p_x + ego0.v_x * u + 0.5 * A * u * u
        v1 = ego0.v_x + A * u
        tau = t - u
        return p1 + v1 * tau - 0.5 * D * tau * tau
    return leader_position_at(leader, plan.a_x_1_d, t) - _margin_of(plan, ego0, leader)


def _margin_of(plan: LongitudinalPlan, ego0: VehicleState,
               leader: VehicleState) -> float:
    # the binding margin the plan was solved for: evaluate the exact gap at
    # the first instant of the envelope-riding regime
    t_ride = min(plan.tau_1, plan.tau_2)
    p, _, _ = eval_knots(list(plan.knots), t_ride)
    return leader_position_at(leader, plan.a_x_1_d, t_ride) - p


def follower_position_at(follower: VehicleState, a_x_f: float, t: float) -> float:
    """Follower envelope position under a constant signed acceleration, with
    the standstill clamp for braking."""
    p, v = follower.p_x, follower.v_x
    if a_x_f < 0.0 and v + a_x_f * t < 0.0:
        return p + v * v / (-2.0 * a_x_f)
    if v <= 0.0 and a_x_f <= 0.0:
        return p
    return p + v * t + 0.5 * a_x_f * t * t


# --- existence verdict ------------------------------------------------------

@dataclass(frozen=True, slots=True)
class EvasionCheck:
    """Outcome of the safe-evasion existence test."""

    exists: bool
    lateral: LateralPlan
    longitudinal: LongitudinalPlan | None
    limiting_constraint: str | None  # "leader" | "follower" | "lateral" | None


def _overlap_windows(lateral: LateralPlan, y_thresh: float,
                     t_end: float) -> list[tuple[float, float]]:
    """Connected intervals of [0, t_end] where the lateral position exceeds
    y_thresh (vehicle edge past the lane boundary)."""
    cuts = sorted({0.0, min(lateral.t_1, t_end), min(lateral.t_y_f, t_end), t_end})
    samples: list[float] = []
    for a, b in zip(cuts, cuts[1:]):
        # roots of y(t) = y_thresh on [a, b] (y quadratic there)
        ya, va = lateral.state(a)
        acc = lateral.accel(a + 0.5 * (b - a) if b > a else a)
        # y(a+s) = ya + va s + acc s^2/2
        if acc == 0.0:
            if va != 0.0:
                s = (y_thresh - ya) / va
                if 0.0 < s < b - a:
                    samples.append(a + s)
        else:
            disc = va * va - 2.0 * acc * (ya - y_thresh)
            if disc >= 0.0:
                r = math.sqrt(disc)
                for s in ((-va + r) / acc, (-va - r) / acc):
                    if 0.0 < s < b - a:
                        samples.append(a + s)
    cuts = sorted(set(cuts) | set(samples))
    windows: list[tuple[float, float]] = []
    for a, b in zip(cuts, cuts[1:]):
        ym, _ = lateral.state(0.5 * (a + b))
        if ym > y_thresh:
            if windows and abs(windows[-1][1] - a) < 1e-12:
                windows[-1] = (windows[-1][0], b)
            else:
                windows.append((a, b))
    return windows


def evasion_exists(ego: VehicleState, leader: VehicleState,
                   follower: VehicleState | None, chain: ChainResult,
                   follower_model: str | None, geometry: LaneGeometry,
                   limits: MechanicalLimits,
                   strict_window: bool = True,
                   margin: float | None = None) -> EvasionCheck:
    """Does a safe evasion trajectory exist from this state?

    Computes the fastest lateral retreat, then the longitudinal profile
    against the worst-case leader envelope, then checks the profile against
    the follower envelope (accelerating hard if aggressive or unknown,
    braking hard if collaborative).  ``strict_window=True`` checks the
    follower gap over the whole retreat window; otherwise only while the
    ego's edge actually overlaps the target lane.  ``margin`` overrides
    geometry.p_m as the position-point margin (the simulator passes
    p_m + l_v so that a p_m bumper gap holds between vehicle rectangles).
    """
    p_m = geometry.p_m if margin is None else margin
    lateral = lateral_evasion(ego.p_y, ego.v_y, geometry, limits.a_y_m)
    T = lateral.t_y_f
    try:
        lon = longitudinal_evasion(ego, leader, chain.a_x_1_d, limits,
                                   p_m, T)
    except EvasionInfeasible:
        return EvasionCheck(False, lateral, None, "leader")

    if follower is not None and follower_model is not None:
        a_f = -limits.a_x_d if follower_model == MODEL_COLLABORATIVE else limits.a_x_a
        f_knots = const_accel_knots(follower.p_x, follower.v_x, a_f)
        ego_knots = list(lon.knots)
        ok = True
        if strict_window:
            ok = min_relative_gap(ego_knots, f_knots, T) >= p_m - _EPS
        else:
            for a, b in _overlap_windows(lateral, geometry.y_retreat, T):
                if min_relative_gap(ego_knots, f_knots, b, a) < p_m - _EPS:
                    ok = False
                    break
        if not ok:
            return EvasionCheck(False, lateral, lon, "follower")
    return EvasionCheck(True, lateral, lon, None)
