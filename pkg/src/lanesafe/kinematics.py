"""Exact piecewise constant-acceleration kinematics.

Longitudinal motion never reverses: a braking vehicle stops and holds.  All
trajectory evaluation in the package goes through the closed forms here, so
there is no integration error anywhere in the analysis path.

A trajectory is represented as a list of knots ``(t, p, v, a)``: from time
``t`` the vehicle moves with constant acceleration ``a`` starting at position
``p`` with velocity ``v``, until the next knot.  The last knot extends to
infinity, and within each segment the velocity stays non-negative by
construction.
"""
from __future__ import annotations

import math

Knots = list[tuple[float, float, float, float]]

_INF = math.inf


def advance(p: float, v: float, a: float, dt: float) -> tuple[float, float]:
    """One exact longitudinal step with the stop clamp (v never below 0)."""
    if dt <= 0.0:
        return p, v
    if v <= 0.0 and a <= 0.0:
        return p, 0.0
    if a < 0.0 and v + a * dt < 0.0:
        # stops inside the step; position advances to the stop point
        return p + v * v / (-2.0 * a), 0.0
    return p + v * dt + 0.5 * a * dt * dt, v + a * dt


def stop_position(p: float, v: float, decel: float) -> float:
    """Where a vehicle braking at ``decel`` (magnitude) comes to rest."""
    if decel <= 0.0:
        return _INF
    return p + v * v / (2.0 * decel)


def braking_knots(p: float, v: float, decel: float) -> Knots:
    """Brake at ``decel`` (magnitude >= 0) until stop, then hold."""
    if v <= 0.0:
        return [(0.0, p, 0.0, 0.0)]
    if decel <= 0.0:
        return [(0.0, p, v, 0.0)]
    t_stop = v / decel
    return [(0.0, p, v, -decel), (t_stop, p + v * v / (2.0 * decel), 0.0, 0.0)]


def const_accel_knots(p: float, v: float, a: float) -> Knots:
    """Constant signed acceleration with the stop clamp."""
    if a < 0.0:
        return braking_knots(p, v, -a)
    if v <= 0.0 and a == 0.0:
        return [(0.0, p, 0.0, 0.0)]
    return [(0.0, p, v, a)]


def eval_knots(knots: Knots, t: float) -> tuple[float, float, float]:
    """Position, velocity and acceleration at time t (t >= 0)."""
    seg = knots[0]
    for k in knots[1:]:
        if k[0] > t:
            break
        seg = k
    t0, p, v, a = seg
    tau = t - t0
    return p + v * tau + 0.5 * a * tau * tau, v + a * tau, a


def min_relative_gap(front: Knots, rear: Knots, t_end: float,
                     t_start: float = 0.0) -> float:
    """Exact minimum of front(t) - rear(t) over [t_start, t_end].

    The relative position is quadratic on every merged segment, so the
    minimum lies at a segment endpoint or at an interior vertex where the
    relative acceleration is positive.
    """
    times = {t_start, t_end}
    for k in front[1:]:
        if t_start < k[0] < t_end:
            times.add(k[0])
    for k in rear[1:]:
        if t_start < k[0] < t_end:
            times.add(k[0])
    cuts = sorted(times)

    best = _INF
    for i in range(len(cuts) - 1):
        t0 = cuts[i]
        pf, vf, af = eval_knots(front, t0)
        pr, vr, ar = eval_knots(rear, t0)
        dp, dv, da = pf - pr, vf - vr, af - ar
        if dp < best:
            best = dp
        if da > 0.0:
            tau = -dv / da
            if 0.0 < tau < cuts[i + 1] - t0:
                g = dp + dv * tau + 0.5 * da * tau * tau
                if g < best:
                    best = g
    pf, _, _ = eval_knots(front, t_end)
    pr, _, _ = eval_knots(rear, t_end)
    return min(best, pf - pr)


def min_pair_brake_gap(p_f: float, v_f: float, a_f: float,
                       p_r: float, v_r: float, a_r: float) -> float:
    """Minimum gap ever reached (over all t >= 0) when the front vehicle
    brakes at a_f and the rear at a_r, both magnitudes, holding after stop.

    Returns -inf when the rear never stops while the front does (or cruises
    slower), i.e. the gap shrinks without bound.
    """
    rear_stops = a_r > 0.0 or v_r <= 0.0
    front_stops = a_f > 0.0 or v_f <= 0.0
    if not rear_stops:
        if not front_stops and v_f >= v_r:
            return p_f - p_r  # both cruise, gap never shrinks
        return -_INF
    t_r = (v_r / a_r) if a_r > 0.0 and v_r > 0.0 else 0.0
    if front_stops:
        t_f = (v_f / a_f) if a_f > 0.0 and v_f > 0.0 else 0.0
        horizon = max(t_r, t_f)
    else:
        horizon = t_r  # front cruises on; gap only grows after the rear stops
    front = braking_knots(p_f, v_f, a_f)
    rear = braking_knots(p_r, v_r, a_r)
    return min_relative_gap(front, rear, horizon if horizon > 0.0 else 1.0)
