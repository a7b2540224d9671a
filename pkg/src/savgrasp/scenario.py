"""Scenario files: TOML with nested tables, ``schema = 1``.

Heights and positions in scenario files are (north, east, height-up); they
are converted to NED when the scenario is built.

Example::

    schema = 1
    name = "hover-161g"
    controller = "dompc"
    duration = 8.0
    seed = 3

    [initial]
    position = [0.0, 0.0, 1.0]

    [reference]
    type = "hover"
    point = [0.0, 0.0, 1.0]

    [[events]]
    t = 2.0
    type = "attach"
    mass = 0.161
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
import tomli

from .dynamics import AttachedPayload, GroundEffectConfig, NoiseConfig, VehicleParams
from .fsm import MissionPlan
from .inner_loop import AttitudeGains
from .nmpc import HorizonReference, NmpcConfig
from .observer import ObserverConfig
from .pid import PidGains

SCHEMA_VERSION = 1
CONTROLLERS = ("dompc", "nmpc", "pid")
EVENT_TYPES = ("attach", "detach", "battery", "wind", "gate", "actuators")


class ScenarioError(ValueError):
    """Invalid or unreadable scenario configuration."""


def ned(point) -> np.ndarray:
    n, e, h = (float(v) for v in point)
    return np.array([n, e, -h])


class HoverReference:
    def __init__(self, point):
        self.point = ned(point)

    def sample(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        p = np.tile(self.point, (t.size, 1))
        return p, np.zeros_like(p), np.zeros_like(p)


class CircleReference:
    """Constant-altitude circle with a hold, then a linear ramp in angular speed."""

    def __init__(self, radius: float, speed: float, altitude: float, center=(0.0, 0.0),
                 hold: float = 2.0, ramp: float = 2.0):
        if radius <= 0 or speed < 0 or ramp < 0:
            raise ScenarioError("circle needs radius > 0, speed >= 0, ramp >= 0")
        self.radius = radius
        self.speed = speed
        self.altitude = altitude
        self.center = np.asarray(center, dtype=float)
        self.hold = hold
        self.ramp = ramp
        self.w = speed / radius

    def _angle(self, t):
        tau = np.clip(t - self.hold, 0.0, None)
        if self.ramp > 0:
            a = self.w / self.ramp
            in_ramp = tau < self.ramp
            th = np.where(in_ramp, 0.5 * a * tau ** 2, 0.5 * a * self.ramp ** 2 + self.w * (tau - self.ramp))
            thd = np.where(in_ramp, a * tau, self.w)
            thdd = np.where(in_ramp & (t >= self.hold), a, 0.0)
        else:
            th, thd, thdd = self.w * tau, np.where(t >= self.hold, self.w, 0.0), np.zeros_like(tau)
        return th, thd, thdd

    def sample(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        th, thd, thdd = self._angle(t)
        r = self.radius
        c, s = np.cos(th), np.sin(th)
        pos = np.stack([self.center[0] + r * c, self.center[1] + r * s, np.full_like(t, -self.altitude)], axis=1)
        vel = np.stack([-r * thd * s, r * thd * c, np.zeros_like(t)], axis=1)
        acc = np.stack([-r * thdd * s - r * thd ** 2 * c, r * thdd * c - r * thd ** 2 * s, np.zeros_like(t)], axis=1)
        return pos, vel, acc


class WaypointReference:
    """Step setpoints switching at given times."""

    def __init__(self, points):
        if not points:
            raise ScenarioError("points reference needs at least one entry")
        self.times = np.array([float(p["t"]) for p in points])
        self.points = np.array([ned(p["point"]) for p in points])

    def sample(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        idx = np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, len(self.times) - 1)
        p = self.points[idx]
        return p, np.zeros_like(p), np.zeros_like(p)


def horizon(reference, t: float, n_nodes: int, dt: float) -> HorizonReference:
    pos, vel, acc = reference.sample(t + dt * np.arange(n_nodes))
    return HorizonReference(pos, vel, acc)


@dataclass
class Event:
    t: float
    type: str
    payload: AttachedPayload | None = None
    value: object = None


@dataclass
class MetricsConfig:
    start: float = 0.0
    steady_start: float | None = None
    settle_band: float = 0.05
    settle_hold: float = 2.0


@dataclass
class Scenario:
    name: str = "scenario"
    controller: str = "dompc"
    duration: float = 10.0
    seed: int = 0
    vehicle: VehicleParams = field(default_factory=VehicleParams)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    observer: ObserverConfig = field(default_factory=ObserverConfig)
    nmpc: NmpcConfig = field(default_factory=NmpcConfig)
    tau_phi: float | None = None
    tau_theta: float | None = None
    attitude: AttitudeGains = field(default_factory=AttitudeGains)
    pid: PidGains = field(default_factory=PidGains)
    ground: GroundEffectConfig = field(default_factory=GroundEffectConfig)
    battery_decay: float = 0.0
    wind: tuple = (0.0, 0.0, 0.0)
    initial_position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    reference: object = None
    mission: MissionPlan | None = None
    mission_object: AttachedPayload | None = None
    events: list = field(default_factory=list)
    gate_off_until: float = 0.0
    metrics: MetricsConfig = field(default_factory=MetricsConfig)
    dt: float = 0.01
    plant_substeps: int = 10
    m_nominal: float | None = None

    def __post_init__(self):
        if self.controller not in CONTROLLERS:
            raise ScenarioError(f"unknown controller {self.controller!r}; expected one of {CONTROLLERS}")
        if self.duration <= 0:
            raise ScenarioError("duration must be positive")
        if self.reference is None and self.mission is None:
            self.reference = HoverReference((self.initial_position[0], self.initial_position[1],
                                             -self.initial_position[2]))

    @property
    def nominal_mass(self) -> float:
        return self.vehicle.m if self.m_nominal is None else self.m_nominal

    def with_controller(self, controller: str) -> "Scenario":
        sc = copy.deepcopy(self)
        if controller not in CONTROLLERS:
            raise ScenarioError(f"unknown controller {controller!r}")
        sc.controller = controller
        return sc


def _build(cls, table: dict | None, where: str, **extra):
    table = dict(table or {})
    names = {f.name for f in fields(cls)}
    unknown = set(table) - names
    if unknown:
        raise ScenarioError(f"[{where}] unknown keys: {sorted(unknown)}")
    table.update(extra)
    try:
        return cls(**table)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"[{where}] {exc}") from exc


def _payload(table: dict, where: str) -> AttachedPayload:
    t = dict(table)
    t.pop("t", None)
    t.pop("type", None)
    return _build(AttachedPayload, t, where)


def _angles(table: dict | None, keys) -> dict:
    table = dict(table or {})
    for k in keys:
        if k + "_deg" in table:
            table[k] = math.radians(table.pop(k + "_deg"))
    return table


def from_dict(data: dict, base_dir: Path | None = None) -> Scenario:
    if data.get("schema") != SCHEMA_VERSION:
        raise ScenarioError(f"scenario must declare schema = {SCHEMA_VERSION}")
    known = {"schema", "name", "controller", "duration", "seed", "vehicle", "noise", "observer", "nmpc",
             "attitude", "pid", "world", "initial", "reference", "mission", "events", "metrics", "m_nominal",
             "description"}
    unknown = set(data) - known
    if unknown:
        raise ScenarioError(f"unknown top-level keys: {sorted(unknown)}")

    nmpc_table = _angles(data.get("nmpc"), ["angle_max"])
    tau_phi = nmpc_table.pop("tau_phi", None)
    tau_theta = nmpc_table.pop("tau_theta", None)
    vehicle = _build(VehicleParams, data.get("vehicle"), "vehicle")
    nmpc_table.setdefault("T_max", vehicle.T_max)
    nmpc = _build(NmpcConfig, nmpc_table, "nmpc")
    pid_table = _angles(data.get("pid"), ["tilt_max"])
    pid_table.setdefault("T_max", vehicle.T_max)
    pid = _build(PidGains, pid_table, "pid")

    world = dict(data.get("world") or {})
    ground = _build(GroundEffectConfig, world.pop("ground_effect", None), "world.ground_effect")
    battery_decay = float(world.pop("battery_decay", 0.0))
    wind = tuple(world.pop("wind", (0.0, 0.0, 0.0)))
    if world:
        raise ScenarioError(f"[world] unknown keys: {sorted(world)}")

    initial = data.get("initial") or {}
    init_pos = ned(initial.get("position", (0.0, 0.0, 0.0)))

    reference = None
    ref = data.get("reference")
    if ref is not None:
        ref = dict(ref)
        kind = ref.pop("type", "hover")
        try:
            if kind == "hover":
                reference = HoverReference(ref["point"])
            elif kind == "circle":
                reference = CircleReference(**ref)
            elif kind == "points":
                reference = WaypointReference(ref["points"])
            else:
                raise ScenarioError(f"unknown reference type {kind!r}")
        except (KeyError, TypeError) as exc:
            raise ScenarioError(f"[reference] {exc}") from exc

    mission = None
    mission_object = None
    if "mission" in data:
        mtable = dict(data["mission"])
        obj = mtable.pop("object", None)
        mtable.setdefault("start_point", (float(init_pos[0]), float(init_pos[1])))
        mission = _build(MissionPlan, mtable, "mission")
        if obj is not None:
            mission_object = _payload(obj, "mission.object")
    if reference is not None and mission is not None:
        raise ScenarioError("a scenario has either a reference or a mission, not both")

    events = []
    gate_off_until = 0.0
    for i, ev in enumerate(data.get("events", [])):
        kind = ev.get("type")
        if kind not in EVENT_TYPES or "t" not in ev:
            raise ScenarioError(f"[[events]] #{i}: needs t and a type in {EVENT_TYPES}")
        t = float(ev["t"])
        if kind == "attach":
            events.append(Event(t, kind, payload=_payload(ev, f"events[{i}]")))
        elif kind == "detach":
            events.append(Event(t, kind))
        elif kind == "battery":
            events.append(Event(t, kind, value=float(ev["decay"])))
        elif kind == "wind":
            events.append(Event(t, kind, value=tuple(float(v) for v in ev["accel"])))
        elif kind == "gate":
            events.append(Event(t, kind, value=bool(ev["on"])))
        elif kind == "actuators":
            events.append(Event(t, kind, value=bool(ev["enabled"])))
    events.sort(key=lambda e: e.t)

    metrics = _build(MetricsConfig, data.get("metrics"), "metrics")
    if "gate_off_until" in initial:
        gate_off_until = float(initial["gate_off_until"])

    obs = _build(ObserverConfig, data.get("observer"), "observer")
    return Scenario(
        name=str(data.get("name", "scenario")),
        controller=str(data.get("controller", "dompc")),
        duration=float(data.get("duration", 10.0)),
        seed=int(data.get("seed", 0)),
        vehicle=vehicle,
        noise=_build(NoiseConfig, data.get("noise"), "noise"),
        observer=obs,
        nmpc=nmpc,
        tau_phi=tau_phi,
        tau_theta=tau_theta,
        attitude=_build(AttitudeGains, data.get("attitude"), "attitude"),
        pid=pid,
        ground=ground,
        battery_decay=battery_decay,
        wind=wind,
        initial_position=init_pos,
        reference=reference,
        mission=mission,
        mission_object=mission_object,
        events=events,
        gate_off_until=gate_off_until,
        metrics=metrics,
        m_nominal=data.get("m_nominal"),
    )


def load(path) -> Scenario:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            data = tomli.load(fh)
    except FileNotFoundError as exc:
        raise ScenarioError(f"scenario file not found: {path}") from exc
    except tomli.TOMLDecodeError as exc:
        raise ScenarioError(f"{path}: {exc}") from exc
    return from_dict(data, path.parent)


def loads(text: str) -> Scenario:
    try:
        return from_dict(tomli.loads(text))
    except tomli.TOMLDecodeError as exc:
        raise ScenarioError(str(exc)) from exc
