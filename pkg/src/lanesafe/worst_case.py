"""Worst-case deceleration chain for the connected leaders.

Starting from the non-connected leader's emergency deceleration, propagate
upstream the minimal constant deceleration each leader may need to keep the
safe margin to its own front vehicle, floored by its promised band.  The
chain's last entry is the worst-case deceleration of L_1, the quantity every
evasion check is measured against.

Two closed forms are offered for the pairwise solve; see ``required_decel``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import Infeasible
from .kinematics import min_pair_brake_gap
from .types import ConnectivityPromise, MechanicalLimits, VehicleState

FORMULA_CERTIFIED = "certified"
FORMULA_LEGACY = "legacy"

_GAP_TOL = 1e-6
_SAFE_TOL = 1e-9


@dataclass(frozen=True, slots=True)
class ChainResult:
    """Worst-case decelerations down the leader chain.

    ``decels`` and ``required`` run from L_{N+1} (first entry, the emergency
    vehicle) down to L_1 (last entry).  ``required`` holds the pairwise
    minimal decelerations before the promise floor is applied.
    """

    decels: tuple[float, ...]
    required: tuple[float, ...]

    @property
    def a_x_1_d(self) -> float:
        """Worst-case deceleration of the immediate leader L_1."""
        return self.decels[-1]


def leader_position_at(leader: VehicleState, decel: float, t: float) -> float:
    """Position of a leader braking at ``decel`` (magnitude) at time t.

    The braking-to-stop envelope: quadratic until the stop instant, constant
    afterwards; ``decel == 0`` means the vehicle never stops.
    """
    p, v = leader.p_x, leader.v_x
    if decel <= 0.0:
        return p + v * t
    t_stop = v / decel
    if t <= t_stop:
        return p + v * t - 0.5 * decel * t * t
    return p + v * v / (2.0 * decel)


def apply_promise_floor(z: float, promise: ConnectivityPromise | None) -> float:
    """Worst-case deceleration: the promised bound or the required value,
    whichever is larger."""
    if promise is None:
        return z
    return max(promise.a_m_d, z)


def _min_gap(leader: VehicleState, follower: VehicleState,
             leader_decel: float, z: float) -> float:
    return min_pair_brake_gap(leader.p_x, leader.v_x, leader_decel,
                              follower.p_x, follower.v_x, z)


def _bisect_required(leader: VehicleState, follower: VehicleState,
                     leader_decel: float, p_m: float, max_decel: float) -> float:
    """Smallest z in [0, max_decel] whose exact minimum gap stays >= p_m."""
    if _min_gap(leader, follower, leader_decel, 0.0) >= p_m - _GAP_TOL:
        return 0.0
    if _min_gap(leader, follower, leader_decel, max_decel) < p_m - _GAP_TOL:
        raise Infeasible(
            f"no deceleration <= {max_decel} keeps the gap above {p_m}")
    lo, hi = 0.0, max_decel
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if _min_gap(leader, follower, leader_decel, mid) >= p_m:
            hi = mid
        else:
            lo = mid
        if hi - lo < 1e-13:
            break
    return hi


def required_decel(leader: VehicleState, follower: VehicleState,
                   leader_decel: float, p_m: float, max_decel: float,
                   formula: str = FORMULA_CERTIFIED) -> float:
    """Minimal constant deceleration of the rear vehicle keeping the gap
    above p_m while the front vehicle brakes at ``leader_decel`` until stop.

    Two branches exist: the vehicles either reach equal velocity while both
    still move (the critical moment is that instant), or the rear vehicle is
    closest when it stops.  Each branch formula is evaluated and kept only if
    its own applicability condition holds under its value; if none or both
    survive, a monotone bisection against the exact minimum-gap kinematics
    decides.  ``formula="certified"`` (default) uses the equal-velocity
    branch derived from those kinematics and double-checks the result
    exactly; ``formula="legacy"`` evaluates an alternate published form of
    that branch whose quadratic coefficient is 3x larger, as written,
    without the exact-kinematics certificate.
    """
    vf, vr = leader.v_x, follower.v_x
    slack = (leader.p_x - follower.p_x) - p_m
    if slack < -_SAFE_TOL:
        raise Infeasible("gap is already below the safe margin")
    slack = max(slack, 0.0)
    if vr <= 0.0:
        return 0.0

    coef = 1.0 if formula == FORMULA_CERTIFIED else 3.0

    def leader_outlasts(z: float) -> bool:
        # front stopping time >= rear stopping time (decel 0 = never stops)
        if leader_decel <= 0.0:
            return True
        if z <= 0.0:
            return False
        return vf / leader_decel >= vr / z

    candidates: list[float] = []
    # equal-velocity branch
    if vf < vr and slack > 0.0:
        z_a = leader_decel + coef * (vr - vf) ** 2 / (2.0 * slack)
        if leader_outlasts(z_a):
            candidates.append(z_a)
    # stop-distance branch
    if leader_decel > 0.0:
        denom = 2.0 * slack + vf * vf / leader_decel
        z_b = math.inf if denom <= 0.0 else vr * vr / denom
    else:
        z_b = 0.0 if vr <= vf else math.inf
    if math.isfinite(z_b) and not (vf < vr and leader_outlasts(z_b)):
        candidates.append(z_b)

    if len(candidates) == 1:
        z = candidates[0]
        if formula == FORMULA_CERTIFIED:
            if z > max_decel + _GAP_TOL or \
                    _min_gap(leader, follower, leader_decel, min(z, max_decel)) < p_m - _SAFE_TOL:
                z = _bisect_required(leader, follower, leader_decel, p_m, max_decel)
        elif z > max_decel + _GAP_TOL:
            raise Infeasible(
                f"required deceleration {z:.3f} exceeds the limit {max_decel}")
    else:
        z = _bisect_required(leader, follower, leader_decel, p_m, max_decel)

    if z > max_decel + _GAP_TOL:
        raise Infeasible(
            f"required deceleration {z:.3f} exceeds the limit {max_decel}")
    return min(max(z, 0.0), max_decel)


def propagate_chain(states: list[VehicleState],
                    promises: list[ConnectivityPromise | None],
                    event_decel: float, p_m: float, limits: MechanicalLimits,
                    formula: str = FORMULA_CERTIFIED,
                    clamp_infeasible: bool = False) -> ChainResult:
    """Propagate worst-case decelerations down the chain L_1..L_{N+1}.

    ``states``/``promises`` are ordered L_1 first; the last vehicle is the
    non-connected leader seeded with ``event_decel``.  Returns decelerations
    ordered from L_{N+1} down to L_1.  On an infeasible link the error
    carries the 1-based index of the vehicle that cannot comply, unless
    ``clamp_infeasible`` is set, in which case the link saturates at the
    mechanical limit and the walk continues (the vehicle brakes as hard as
    it can and the margin is lost anyway).
    """
    n_total = len(states)
    if n_total == 0:
        return ChainResult((event_decel,), (event_decel,))
    decels = [0.0] * n_total
    required = [0.0] * n_total
    decels[-1] = event_decel
    required[-1] = event_decel
    for i in range(n_total - 2, -1, -1):
        try:
            z = required_decel(states[i + 1], states[i], decels[i + 1],
                               p_m, limits.a_x_d, formula)
        except Infeasible as e:
            if not clamp_infeasible:
                raise Infeasible(str(e), index=i + 1) from None
            z = limits.a_x_d
        required[i] = z
        decels[i] = min(apply_promise_floor(z, promises[i]), limits.a_x_d)
    return ChainResult(tuple(reversed(decels)), tuple(reversed(required)))
