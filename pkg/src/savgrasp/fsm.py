"""Mission state machine for the aerial grasping task.

The node set is reconstructed from the flight narrative: take off, fly to
the object, hover over it, inflate the gripper (dwell), transport, hover,
deflate, land. Any active flight state times out into Land.

Positions in a ``MissionPlan`` are (north, east, height) with height positive
up; setpoints are emitted in NED as (x, y, z, yaw).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np


class Mode(str, enum.Enum):
    IDLE = "Idle"
    TAKEOFF = "Takeoff"
    FLY_TO_GRASP = "FlyToGrasp"
    HOVER_GRASP = "HoverGrasp"
    INFLATING = "Inflating"
    TRANSPORT = "Transport"
    HOVER_RELEASE = "HoverRelease"
    DEFLATING = "Deflating"
    LAND = "Land"
    DONE = "Done"


NOMINAL_SEQUENCE = [
    Mode.IDLE, Mode.TAKEOFF, Mode.FLY_TO_GRASP, Mode.HOVER_GRASP, Mode.INFLATING,
    Mode.TRANSPORT, Mode.HOVER_RELEASE, Mode.DEFLATING, Mode.LAND, Mode.DONE,
]
ABORTABLE = {Mode.TAKEOFF, Mode.FLY_TO_GRASP, Mode.HOVER_GRASP, Mode.INFLATING,
             Mode.TRANSPORT, Mode.HOVER_RELEASE, Mode.DEFLATING}
EDGES = {(a, b) for a, b in zip(NOMINAL_SEQUENCE, NOMINAL_SEQUENCE[1:])} | {(m, Mode.LAND) for m in ABORTABLE}
GATE_OFF = {Mode.TAKEOFF, Mode.LAND}
ARMED = set(Mode) - {Mode.IDLE, Mode.DONE}


class FsmError(RuntimeError):
    pass


def _ned(point) -> np.ndarray:
    n, e, h = (float(v) for v in point)
    return np.array([n, e, -h])


@dataclass
class MissionPlan:
    grasp_point: tuple
    release_point: tuple
    cruise_altitude: float = 1.0
    start_point: tuple = (0.0, 0.0)
    intermediate: list = field(default_factory=list)
    tolerance: float = 0.10
    hold_time: float = 1.0
    inflate_time: float = 5.0
    deflate_time: float = 2.0
    idle_time: float = 0.5
    timeout: float = 30.0
    land_height: float = 0.05
    # Land aims this far below the ground so ground effect cannot hold the vehicle aloft
    land_sink: float = 0.3
    yaw: float = 0.0

    def __post_init__(self):
        if self.tolerance <= 0:
            raise ValueError("arrival tolerance must be positive")
        if self.inflate_time < 0 or self.hold_time < 0:
            raise ValueError("dwell times must be non-negative")


@dataclass
class MissionState:
    mode: Mode = Mode.IDLE
    t_entered: float = 0.0
    setpoint: np.ndarray = field(default_factory=lambda: np.zeros(4))
    arrived_since: float | None = None
    waypoint: int = 0
    attached: bool = False
    attach_count: int = 0
    aborted: bool = False


@dataclass
class FsmOutput:
    state: MissionState
    setpoint: np.ndarray
    gripper: str
    gate: bool
    event: str | None = None


def _transport_points(plan: MissionPlan) -> list:
    return [_ned(p) for p in plan.intermediate] + [_ned(plan.release_point)]


def _target(ms: MissionState, plan: MissionPlan, start_xy) -> np.ndarray:
    gx, gy, _ = _ned(plan.grasp_point)
    cruise = -plan.cruise_altitude
    if ms.mode in (Mode.IDLE, Mode.TAKEOFF):
        xyz = np.array([start_xy[0], start_xy[1], cruise if ms.mode == Mode.TAKEOFF else 0.0])
    elif ms.mode == Mode.FLY_TO_GRASP:
        xyz = np.array([gx, gy, cruise])
    elif ms.mode in (Mode.HOVER_GRASP, Mode.INFLATING):
        xyz = _ned(plan.grasp_point)
    elif ms.mode == Mode.TRANSPORT:
        xyz = _transport_points(plan)[ms.waypoint]
    elif ms.mode in (Mode.HOVER_RELEASE, Mode.DEFLATING):
        xyz = _ned(plan.release_point)
    else:
        xyz = ms.setpoint[:3].copy()
        if ms.mode == Mode.LAND:
            xyz[2] = plan.land_sink
    return np.append(xyz, plan.yaw)


def _enter(ms: MissionState, mode: Mode, t: float, plan: MissionPlan, start_xy) -> MissionState:
    if (ms.mode, mode) not in EDGES:
        raise FsmError(f"illegal transition {ms.mode.value} -> {mode.value}")
    ms.mode = mode
    ms.t_entered = t
    ms.arrived_since = None
    ms.waypoint = 0
    ms.setpoint = _target(ms, plan, start_xy)
    return ms


def _arrived(ms: MissionState, pos, t: float, plan: MissionPlan) -> bool:
    if np.linalg.norm(np.asarray(pos) - ms.setpoint[:3]) < plan.tolerance:
        if ms.arrived_since is None:
            ms.arrived_since = t
        return t - ms.arrived_since >= plan.hold_time - 1e-9
    ms.arrived_since = None
    return False


def new_mission(plan: MissionPlan, t0: float = 0.0, start_xy=None) -> MissionState:
    ms = MissionState(t_entered=t0)
    ms.setpoint = _target(ms, plan, plan.start_point if start_xy is None else start_xy)
    return ms


def gripper_command(mode: Mode) -> str:
    if mode in (Mode.INFLATING, Mode.TRANSPORT, Mode.HOVER_RELEASE):
        return "inflate"
    return "deflate"


def fsm_step(ms: MissionState, plan: MissionPlan, pos_estimate, t: float, start_xy=None) -> FsmOutput:
    """Advance the mission by one tick. Mutates and returns ``ms`` inside the output.

    At most one transition fires per call. The ``event`` field carries
    ``"attach"`` at the end of the inflation dwell and ``"detach"`` on
    entry to Deflating; the caller applies them to the simulated world.
    """
    start_xy = plan.start_point if start_xy is None else start_xy
    pos = np.asarray(pos_estimate, dtype=float)
    event = None
    dwell = t - ms.t_entered
    mode = ms.mode

    if mode in ABORTABLE and dwell > plan.timeout:
        ms.aborted = True
        if ms.attached:
            event = "detach"
            ms.attached = False
        _enter(ms, Mode.LAND, t, plan, start_xy)
    elif mode == Mode.IDLE:
        if dwell >= plan.idle_time - 1e-9:
            _enter(ms, Mode.TAKEOFF, t, plan, start_xy)
    elif mode == Mode.TAKEOFF:
        if _arrived(ms, pos, t, plan):
            _enter(ms, Mode.FLY_TO_GRASP, t, plan, start_xy)
    elif mode == Mode.FLY_TO_GRASP:
        if _arrived(ms, pos, t, plan):
            _enter(ms, Mode.HOVER_GRASP, t, plan, start_xy)
    elif mode == Mode.HOVER_GRASP:
        if _arrived(ms, pos, t, plan):
            _enter(ms, Mode.INFLATING, t, plan, start_xy)
    elif mode == Mode.INFLATING:
        if dwell >= plan.inflate_time - 1e-9:
            if ms.attach_count >= 1:
                raise FsmError("gripper attach requested twice in one mission")
            event = "attach"
            ms.attached = True
            ms.attach_count += 1
            _enter(ms, Mode.TRANSPORT, t, plan, start_xy)
    elif mode == Mode.TRANSPORT:
        if _arrived(ms, pos, t, plan):
            points = _transport_points(plan)
            if ms.waypoint + 1 < len(points):
                ms.waypoint += 1
                ms.arrived_since = None
                ms.setpoint = np.append(points[ms.waypoint], plan.yaw)
            else:
                _enter(ms, Mode.HOVER_RELEASE, t, plan, start_xy)
    elif mode == Mode.HOVER_RELEASE:
        if dwell >= plan.hold_time - 1e-9:
            _enter(ms, Mode.DEFLATING, t, plan, start_xy)
            if ms.attached:
                event = "detach"
                ms.attached = False
    elif mode == Mode.DEFLATING:
        if dwell >= plan.deflate_time - 1e-9:
            _enter(ms, Mode.LAND, t, plan, start_xy)
    elif mode == Mode.LAND:
        landed = -pos[2] <= plan.land_height
        if landed:
            if ms.arrived_since is None:
                ms.arrived_since = t
            if t - ms.arrived_since >= plan.hold_time - 1e-9:
                _enter(ms, Mode.DONE, t, plan, start_xy)
        else:
            ms.arrived_since = None

    return FsmOutput(ms, ms.setpoint.copy(), gripper_command(ms.mode),
                     ms.mode not in GATE_OFF, event)


def check_trace(modes) -> None:
    """Raise ``FsmError`` unless consecutive distinct modes follow ``EDGES``."""
    prev = None
    for m in modes:
        m = Mode(m)
        if prev is not None and m != prev and (prev, m) not in EDGES:
            raise FsmError(f"illegal transition {prev.value} -> {m.value}")
        prev = m
