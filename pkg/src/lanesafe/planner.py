"""Pluggable lane-change planners producing per-step (a_x, a_y) commands.

The rule-based baseline is the default for every experiment: deterministic
and constants-auditable.  Externally trained feedforward networks can be
dropped in through a JSON weights file; only inference is supported.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidScenario, ShapeMismatch
from .types import LaneGeometry, MechanicalLimits, VehicleState

KIND_RULE_BASED = "rule_based"
KIND_NETWORK = "network"

_ACTIVATIONS = {
    "tanh": np.tanh,
    "relu": lambda x: np.maximum(x, 0.0),
    "identity": lambda x: x,
}

# Observation vector layout fed to network planners (and mirrored by the
# rule-based gap logic): ego speed, ego lateral position/velocity, gap and
# closing speed to the immediate leader, gap and closing speed to the
# follower.  Absent vehicles read as a large gap with zero closing speed.
OBS_SIZE = 7
_ABSENT_GAP = 1000.0


@dataclass(frozen=True, slots=True)
class Observation:
    """What the planner sees each control period."""

    ego: VehicleState
    leader: VehicleState | None
    follower: VehicleState | None
    dt: float
    leader_accel: float = 0.0  # estimated from the leader's motion

    def vector(self) -> list[float]:
        e = self.ego
        gap_l, dv_l = _ABSENT_GAP, 0.0
        if self.leader is not None:
            gap_l = self.leader.p_x - e.p_x
            dv_l = self.leader.v_x - e.v_x
        gap_f, dv_f = _ABSENT_GAP, 0.0
        if self.follower is not None:
            gap_f = e.p_x - self.follower.p_x
            dv_f = self.follower.v_x - e.v_x
        return [e.v_x, e.p_y, e.v_y, gap_l, dv_l, gap_f, dv_f]


@dataclass(frozen=True, slots=True)
class Layer:
    weights: tuple[tuple[float, ...], ...]  # rows x cols, row-major
    bias: tuple[float, ...]
    activation: str = "identity"


@dataclass(frozen=True, slots=True)
class NetworkWeights:
    layers: tuple[Layer, ...]

    def check(self) -> None:
        if not self.layers:
            raise InvalidScenario("network needs at least one layer")
        prev_rows = None
        for i, layer in enumerate(self.layers):
            rows = len(layer.weights)
            if rows == 0 or len(layer.bias) != rows:
                raise InvalidScenario(f"layer {i}: bias length must equal row count")
            cols = len(layer.weights[0])
            for row in layer.weights:
                if len(row) != cols:
                    raise InvalidScenario(f"layer {i}: ragged weight matrix")
                for x in row:
                    if not math.isfinite(x):
                        raise InvalidScenario(f"layer {i}: non-finite weight")
            if layer.activation not in _ACTIVATIONS:
                raise InvalidScenario(f"layer {i}: unknown activation {layer.activation!r}")
            if prev_rows is not None and cols != prev_rows:
                raise ShapeMismatch(
                    f"layer {i} expects {cols} inputs, previous layer emits {prev_rows}")
            prev_rows = rows


@dataclass(frozen=True, slots=True)
class RuleParams:
    """Gains of the rule-based baseline."""

    k_speed: float = 0.6        # tracking of the leader's speed
    k_gap: float = 0.08         # tracking of the desired slot gap
    k_brake_ff: float = 1.0     # feedforward of the leader's braking
    headway: float = 0.5        # desired bumper gap = p_m + headway * v_ego
    v_y_max: float = 2.0        # lateral cruise speed cap; full change ~2.8 s
    cruise_speed: float = 30.0  # fallback setpoint with no leader in view


@dataclass(frozen=True, slots=True)
class PlannerSpec:
    kind: str = KIND_RULE_BASED
    network: NetworkWeights | None = None
    params: RuleParams = field(default_factory=RuleParams)

    def check(self) -> None:
        if self.kind not in (KIND_RULE_BASED, KIND_NETWORK):
            raise InvalidScenario(f"unknown planner kind {self.kind!r}")
        if self.kind == KIND_NETWORK:
            if self.network is None:
                raise InvalidScenario("network planner needs weights")
            self.network.check()


def mlp_forward(weights: NetworkWeights, inputs: list[float]) -> list[float]:
    """Sequential affine + activation evaluation of a feedforward network."""
    x = np.asarray(inputs, dtype=float)
    if x.ndim != 1:
        raise ShapeMismatch("input must be a flat vector")
    for i, layer in enumerate(weights.layers):
        w = np.asarray(layer.weights, dtype=float)
        if x.shape[0] != w.shape[1]:
            raise ShapeMismatch(
                f"layer {i} expects {w.shape[1]} inputs, got {x.shape[0]}")
        x = _ACTIVATIONS[layer.activation](w @ x + np.asarray(layer.bias, dtype=float))
    return [float(v) for v in x]


def _lateral_profile(y: float, v_y: float, target: float, a_max: float,
                     v_max: float, dt: float) -> float:
    """Trapezoidal tracking toward a lateral setpoint respecting a_max."""
    d = target - y
    if abs(d) < 5e-3 and abs(v_y) < 5e-2:
        return _clip(-v_y / dt, -a_max, a_max)
    v_des = math.copysign(min(v_max, math.sqrt(2.0 * a_max * abs(d))), d)
    return _clip((v_des - v_y) / dt, -a_max, a_max)


def baseline_lane_change(ego: VehicleState, leader: VehicleState | None,
                         params: RuleParams, limits: MechanicalLimits,
                         geometry: LaneGeometry, dt: float,
                         leader_accel: float = 0.0) -> tuple[float, float]:
    """Rule-based command: steer laterally toward the target lane center and
    longitudinally track the slot behind the immediate leader (matching the
    leader's braking plus proportional gap/speed corrections)."""
    a_y = _lateral_profile(ego.p_y, ego.v_y, geometry.w_l, limits.a_y_m,
                           params.v_y_max, dt)
    if leader is not None:
        gap = leader.p_x - ego.p_x
        gap_des = geometry.p_m + geometry.l_v + params.headway * ego.v_x
        a_x = (params.k_brake_ff * min(leader_accel, 0.0)
               + params.k_speed * (leader.v_x - ego.v_x)
               + params.k_gap * (gap - gap_des))
    else:
        a_x = params.k_speed * (params.cruise_speed - ego.v_x)
    return a_x, a_y


def _clip(x: float, lo: float, hi: float) -> float:
    return lo if x < lo else hi if x > hi else x


def plan(spec: PlannerSpec, obs: Observation, limits: MechanicalLimits,
         geometry: LaneGeometry) -> tuple[float, float]:
    """Dispatch to the configured planner; the command is always clamped to
    the mechanical limits."""
    if spec.kind == KIND_NETWORK:
        out = mlp_forward(spec.network, obs.vector())
        a_x = out[0] if out else 0.0
        a_y = out[1] if len(out) > 1 else 0.0
    else:
        a_x, a_y = baseline_lane_change(obs.ego, obs.leader, spec.params,
                                        limits, geometry, obs.dt,
                                        obs.leader_accel)
    if not math.isfinite(a_x):
        a_x = 0.0
    if not math.isfinite(a_y):
        a_y = 0.0
    return (_clip(a_x, -limits.a_x_d, limits.a_x_a),
            _clip(a_y, -limits.a_y_m, limits.a_y_m))


# --- weights file IO --------------------------------------------------------

def weights_from_dict(d: dict) -> NetworkWeights:
    layers = []
    for ld in d["layers"]:
        layers.append(Layer(
            weights=tuple(tuple(float(x) for x in row) for row in ld["weights"]),
            bias=tuple(float(x) for x in ld["bias"]),
            activation=str(ld.get("activation", "identity")).lower(),
        ))
    w = NetworkWeights(tuple(layers))
    w.check()
    return w


def load_weights(path: str) -> NetworkWeights:
    with open(path) as f:
        return weights_from_dict(json.load(f))
