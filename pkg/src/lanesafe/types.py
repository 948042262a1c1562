"""Core domain types: vehicle states, limits, lane geometry, scenarios.

Coordinate frame: the original lane center is y=0 and the target lane center
is y=w_l.  Longitudinal origin is the ego vehicle's initial position.  All
decelerations are stored as magnitudes (positive numbers); commanded
accelerations are signed.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

from .errors import GapTooSmall, InvalidScenario

# Default constants (typical passenger-car values; configurable everywhere).
DEFAULT_A_X_D = 6.0     # max longitudinal deceleration magnitude, m/s^2
DEFAULT_A_X_A = 3.0     # max longitudinal acceleration, m/s^2
DEFAULT_A_Y_M = 2.0     # max lateral acceleration magnitude, m/s^2
DEFAULT_P_M = 2.0       # minimum safe longitudinal gap, m
DEFAULT_W_L = 3.5       # lane width, m
DEFAULT_W_V = 2.0       # vehicle width, m
DEFAULT_L_V = 4.5       # vehicle length, m
DEFAULT_DT = 0.1        # control period, s
DEFAULT_HORIZON = 10.0  # simulation duration, s
DEFAULT_A_M_D = 0.5     # promised deceleration bound, m/s^2
DEFAULT_A_M_A = 2.0     # promised acceleration bound, m/s^2
HUMAN_BAND_FACTOR = 1.5  # human-driven promise band widening
DEFAULT_TRIGGER_TIME = 1.0  # emergency brake onset, s

ROLE_LEADER = "leader"
ROLE_FOLLOWER = "follower"

NATURE_AGGRESSIVE = "aggressive"
NATURE_COLLABORATIVE = "collaborative"


@dataclass(frozen=True, slots=True)
class VehicleState:
    """Longitudinal/lateral position and velocity of one vehicle at an instant."""

    p_x: float
    v_x: float
    p_y: float = 0.0
    v_y: float = 0.0

    def check(self) -> None:
        for name in ("p_x", "v_x", "p_y", "v_y"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidScenario(f"non-finite state field {name}")
        if self.v_x < 0.0:
            raise InvalidScenario(f"v_x must be >= 0, got {self.v_x}")


@dataclass(frozen=True, slots=True)
class MechanicalLimits:
    """Mechanical acceleration bounds (all magnitudes, strictly positive)."""

    a_x_d: float = DEFAULT_A_X_D
    a_x_a: float = DEFAULT_A_X_A
    a_y_m: float = DEFAULT_A_Y_M

    def check(self) -> None:
        for name in ("a_x_d", "a_x_a", "a_y_m"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0.0):
                raise InvalidScenario(f"limit {name} must be > 0, got {v}")


@dataclass(frozen=True, slots=True)
class LaneGeometry:
    """Lane and vehicle geometry plus the minimum safe longitudinal gap."""

    w_l: float = DEFAULT_W_L
    w_v: float = DEFAULT_W_V
    l_v: float = DEFAULT_L_V
    p_m: float = DEFAULT_P_M

    @property
    def y_retreat(self) -> float:
        """Lateral position where the vehicle edge touches the lane boundary.

        A vehicle centered at or below this y is fully inside the original
        lane; it is the endpoint of every lateral retreat.
        """
        return 0.5 * (self.w_l - self.w_v)

    @property
    def y_settled(self) -> float:
        """Lateral position from which the vehicle is fully inside the
        target lane (the lane change is geometrically complete)."""
        return 0.5 * (self.w_l + self.w_v)

    @property
    def center_margin(self) -> float:
        """Center-to-center longitudinal distance equivalent to a p_m bumper
        gap: the margin every certified motion maintains between position
        points, since positions are vehicle centers and rectangles have
        length l_v."""
        return self.p_m + self.l_v

    def check(self) -> None:
        if not (0.0 < self.w_v < self.w_l):
            raise InvalidScenario(f"need 0 < w_v < w_l, got w_v={self.w_v}, w_l={self.w_l}")
        if self.l_v <= 0.0:
            raise InvalidScenario(f"l_v must be > 0, got {self.l_v}")
        if self.p_m <= 0.0:
            raise InvalidScenario(f"p_m must be > 0, got {self.p_m}")


@dataclass(frozen=True, slots=True)
class ConnectivityPromise:
    """A connected vehicle's declared acceleration band [-a_m_d, a_m_a]."""

    a_m_d: float = DEFAULT_A_M_D
    a_m_a: float = DEFAULT_A_M_A

    def check(self, limits: MechanicalLimits) -> None:
        if self.a_m_d < 0.0 or self.a_m_a < 0.0:
            raise InvalidScenario("promise bounds must be >= 0")
        if self.a_m_d > limits.a_x_d:
            raise InvalidScenario(
                f"promised deceleration {self.a_m_d} exceeds mechanical limit {limits.a_x_d}")


def default_promise(human_driven: bool = False) -> ConnectivityPromise:
    """Default promise band; wider for human-driven vehicles."""
    f = HUMAN_BAND_FACTOR if human_driven else 1.0
    return ConnectivityPromise(a_m_d=DEFAULT_A_M_D * f, a_m_a=DEFAULT_A_M_A * f)


@dataclass(frozen=True, slots=True)
class SurroundingVehicle:
    """One surrounding vehicle: a leader L_1..L_{N+1} in the target lane, or
    the single follower F behind the insertion slot.

    ``nature`` declares the ground-truth behaviour of a follower
    ("aggressive" or "collaborative"); it is what the assessment tries to
    recover and is never shown to the ego directly.
    """

    state: VehicleState
    connected: bool
    promise: ConnectivityPromise | None = None
    role: str = ROLE_LEADER
    index: int | None = None  # leader index, 1 = nearest to ego
    human_driven: bool = False
    nature: str | None = None


@dataclass(frozen=True, slots=True)
class EventSpec:
    """The downstream emergency: L_{N+1} brakes at ``decel`` from ``trigger_time``."""

    trigger_time: float = DEFAULT_TRIGGER_TIME
    decel: float = DEFAULT_A_X_D


@dataclass(frozen=True, slots=True)
class ScenarioConfig:
    """A complete simulation scenario."""

    ego: VehicleState
    surroundings: tuple[SurroundingVehicle, ...]
    limits: MechanicalLimits = MechanicalLimits()
    geometry: LaneGeometry = LaneGeometry()
    n_connected_leaders: int = 0
    event: EventSpec = EventSpec()
    p_v: float = 0.0
    dt: float = DEFAULT_DT
    horizon: float = DEFAULT_HORIZON

    @property
    def leaders(self) -> tuple[SurroundingVehicle, ...]:
        """Leaders ordered L_1 (nearest) .. L_{N+1} (farthest)."""
        ls = [s for s in self.surroundings if s.role == ROLE_LEADER]
        ls.sort(key=lambda s: s.index if s.index is not None else 0)
        return tuple(ls)

    @property
    def follower(self) -> SurroundingVehicle | None:
        for s in self.surroundings:
            if s.role == ROLE_FOLLOWER:
                return s
        return None


def validate_scenario(cfg: ScenarioConfig) -> ScenarioConfig:
    """Check every structural invariant; return cfg unchanged if all hold.

    Raises InvalidScenario for structural violations and GapTooSmall when any
    initial adjacent longitudinal gap is below p_m.
    """
    cfg.limits.check()
    cfg.geometry.check()
    cfg.ego.check()

    if not (0.0 <= cfg.p_v <= 1.0):
        raise InvalidScenario(f"p_v must be in [0,1], got {cfg.p_v}")
    if cfg.dt <= 0.0:
        raise InvalidScenario(f"dt must be > 0, got {cfg.dt}")
    if cfg.horizon < cfg.dt:
        raise InvalidScenario(f"horizon {cfg.horizon} shorter than dt {cfg.dt}")
    if cfg.event.decel < 0.0 or cfg.event.decel > cfg.limits.a_x_d:
        raise InvalidScenario(
            f"event decel {cfg.event.decel} outside [0, {cfg.limits.a_x_d}]")

    leaders = cfg.leaders
    n = cfg.n_connected_leaders
    if len(leaders) != n + 1:
        raise InvalidScenario(
            f"expected {n + 1} leaders for N={n}, found {len(leaders)}")
    for want, s in enumerate(leaders, start=1):
        if s.index != want:
            raise InvalidScenario(f"leader indices must be 1..{n + 1} without gaps")
        s.state.check()
        if want <= n:
            if not s.connected:
                raise InvalidScenario(f"leader L_{want} must be connected (N={n})")
            if s.promise is None:
                raise InvalidScenario(f"connected leader L_{want} needs a promise")
            s.promise.check(cfg.limits)
        else:
            if s.connected:
                raise InvalidScenario(f"leader L_{want} (last) must be non-connected")
    for a, b in zip(leaders, leaders[1:]):
        if b.state.p_x <= a.state.p_x:
            raise InvalidScenario("leaders must have strictly increasing p_x")

    followers = [s for s in cfg.surroundings if s.role == ROLE_FOLLOWER]
    if len(followers) > 1:
        raise InvalidScenario("at most one follower is supported")
    for s in cfg.surroundings:
        if s.role not in (ROLE_LEADER, ROLE_FOLLOWER):
            raise InvalidScenario(f"unknown role {s.role!r}")
        if s.connected and s.promise is None and s.role == ROLE_FOLLOWER:
            # a connected follower needs no numeric band for the analysis,
            # but accepts one; nothing to check here
            pass
        if s.nature is not None and s.nature not in (NATURE_AGGRESSIVE, NATURE_COLLABORATIVE):
            raise InvalidScenario(f"unknown follower nature {s.nature!r}")
    if followers:
        followers[0].state.check()

    # Initial adjacent bumper gaps: F <- ego <- L_1 <- ... <- L_{N+1}
    # (positions are centers; the bumper gap subtracts one vehicle length)
    p_m = cfg.geometry.p_m
    l_v = cfg.geometry.l_v
    chain_x = [s.state.p_x for s in leaders]
    if chain_x and chain_x[0] - cfg.ego.p_x - l_v < p_m:
        raise GapTooSmall(
            f"gap ego->L_1 is {chain_x[0] - cfg.ego.p_x - l_v:.3f} m < p_m={p_m}")
    for i in range(len(chain_x) - 1):
        gap = chain_x[i + 1] - chain_x[i] - l_v
        if gap < p_m:
            raise GapTooSmall(f"gap L_{i + 1}->L_{i + 2} is {gap:.3f} m < p_m={p_m}")
    if followers and cfg.ego.p_x - followers[0].state.p_x - l_v < p_m:
        raise GapTooSmall(
            f"gap F->ego is {cfg.ego.p_x - followers[0].state.p_x - l_v:.3f} m < p_m={p_m}")

    return cfg


# --- scenario (de)serialization -------------------------------------------

def _state_to_dict(s: VehicleState) -> dict:
    return {"p_x": s.p_x, "v_x": s.v_x, "p_y": s.p_y, "v_y": s.v_y}


def _state_from_dict(d: dict) -> VehicleState:
    return VehicleState(p_x=float(d["p_x"]), v_x=float(d["v_x"]),
                        p_y=float(d.get("p_y", 0.0)), v_y=float(d.get("v_y", 0.0)))


def scenario_to_dict(cfg: ScenarioConfig) -> dict:
    out = {
        "ego": _state_to_dict(cfg.ego),
        "surroundings": [],
        "limits": {"a_x_d": cfg.limits.a_x_d, "a_x_a": cfg.limits.a_x_a,
                   "a_y_m": cfg.limits.a_y_m},
        "geometry": {"w_l": cfg.geometry.w_l, "w_v": cfg.geometry.w_v,
                     "l_v": cfg.geometry.l_v, "p_m": cfg.geometry.p_m},
        "n_connected_leaders": cfg.n_connected_leaders,
        "event": {"trigger_time": cfg.event.trigger_time, "decel": cfg.event.decel},
        "p_v": cfg.p_v,
        "dt": cfg.dt,
        "horizon": cfg.horizon,
    }
    for s in cfg.surroundings:
        d = {"state": _state_to_dict(s.state), "connected": s.connected,
             "role": s.role, "human_driven": s.human_driven}
        if s.index is not None:
            d["index"] = s.index
        if s.promise is not None:
            d["promise"] = {"a_m_d": s.promise.a_m_d, "a_m_a": s.promise.a_m_a}
        if s.nature is not None:
            d["nature"] = s.nature
        out["surroundings"].append(d)
    return out


def scenario_from_dict(d: dict) -> ScenarioConfig:
    surroundings = []
    for sd in d.get("surroundings", []):
        promise = None
        if sd.get("promise") is not None:
            promise = ConnectivityPromise(a_m_d=float(sd["promise"]["a_m_d"]),
                                          a_m_a=float(sd["promise"]["a_m_a"]))
        surroundings.append(SurroundingVehicle(
            state=_state_from_dict(sd["state"]),
            connected=bool(sd.get("connected", False)),
            promise=promise,
            role=sd.get("role", ROLE_LEADER),
            index=sd.get("index"),
            human_driven=bool(sd.get("human_driven", False)),
            nature=sd.get("nature"),
        ))
    lim = d.get("limits", {})
    geo = d.get("geometry", {})
    ev = d.get("event", {})
    return ScenarioConfig(
        ego=_state_from_dict(d["ego"]),
        surroundings=tuple(surroundings),
        limits=MechanicalLimits(a_x_d=float(lim.get("a_x_d", DEFAULT_A_X_D)),
                                a_x_a=float(lim.get("a_x_a", DEFAULT_A_X_A)),
                                a_y_m=float(lim.get("a_y_m", DEFAULT_A_Y_M))),
        geometry=LaneGeometry(w_l=float(geo.get("w_l", DEFAULT_W_L)),
                              w_v=float(geo.get("w_v", DEFAULT_W_V)),
                              l_v=float(geo.get("l_v", DEFAULT_L_V)),
                              p_m=float(geo.get("p_m", DEFAULT_P_M))),
        n_connected_leaders=int(d.get("n_connected_leaders", 0)),
        event=EventSpec(trigger_time=float(ev.get("trigger_time", DEFAULT_TRIGGER_TIME)),
                        decel=float(ev.get("decel", DEFAULT_A_X_D))),
        p_v=float(d.get("p_v", 0.0)),
        dt=float(d.get("dt", DEFAULT_DT)),
        horizon=float(d.get("horizon", DEFAULT_HORIZON)),
    )


def load_scenario(path: str) -> ScenarioConfig:
    with open(path) as f:
        return scenario_from_dict(json.load(f))


def dump_scenario(cfg: ScenarioConfig, path: str) -> None:
    with open(path, "w") as f:
        json.dump(scenario_to_dict(cfg), f, indent=2)
        f.write("\n")
