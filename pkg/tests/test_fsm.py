import numpy as np
import pytest

from savgrasp.fsm import (ARMED, GATE_OFF, NOMINAL_SEQUENCE, FsmError, MissionPlan, Mode, _enter,
                          check_trace, fsm_step, gripper_command, new_mission)

PLAN = MissionPlan(grasp_point=(1.5, 0.0, 1.0), release_point=(3.0, 1.5, 1.0),
                   intermediate=[(2.0, 0.5, 1.2)])


def run_ideal(plan, t_end=60.0, dt=0.01, tracker=None):
    """Drive the FSM with a vehicle that sits exactly on each setpoint."""
    ms = new_mission(plan)
    pos = np.zeros(3)
    trace, events = [], []
    for k in range(int(t_end / dt)):
        t = k * dt
        out = fsm_step(ms, plan, pos, t)
        trace.append((t, out.state.mode, out.gate, out.gripper))
        if out.event:
            events.append((t, out.event, out.state.mode))
        pos = out.setpoint[:3].copy() if tracker is None else tracker(pos, out)
        if ms.mode == Mode.LAND:
            pos[2] = 0.0
    return ms, trace, events


def test_nominal_sequence():
    ms, trace, events = run_ideal(PLAN)
    modes = [m for _, m, _, _ in trace]
    seq = [modes[0]] + [b for a, b in zip(modes, modes[1:]) if a != b]
    assert seq == NOMINAL_SEQUENCE
    check_trace(modes)
    assert [e for _, e, _ in events] == ["attach", "detach"]
    assert not ms.aborted


def test_attach_at_end_of_inflation():
    _, trace, events = run_ideal(PLAN)
    t_inflate = next(t for t, m, _, _ in trace if m == Mode.INFLATING)
    t_attach = events[0][0]
    assert abs(t_attach - t_inflate - PLAN.inflate_time) < 0.011


def test_gate_off_exactly_in_takeoff_and_land():
    _, trace, _ = run_ideal(PLAN)
    for _, mode, gate, _ in trace:
        assert gate == (mode not in GATE_OFF)


def test_gripper_inflated_while_carrying():
    _, trace, _ = run_ideal(PLAN)
    for _, mode, _, grip in trace:
        assert grip == ("inflate" if mode in (Mode.INFLATING, Mode.TRANSPORT, Mode.HOVER_RELEASE) else "deflate")
    assert gripper_command(Mode.IDLE) == "deflate"


def test_transport_visits_intermediate_point():
    ms = new_mission(PLAN)
    seen = []
    pos = np.zeros(3)
    for k in range(6000):
        out = fsm_step(ms, PLAN, pos, k * 0.01)
        if ms.mode == Mode.TRANSPORT:
            seen.append(tuple(np.round(out.setpoint[:3], 6)))
        pos = out.setpoint[:3]
    assert list(dict.fromkeys(seen)) == [(2.0, 0.5, -1.2), (3.0, 1.5, -1.0)]


def test_timeout_aborts_to_land():
    # a vehicle that never leaves the ground (actuators disabled)
    ms, trace, events = run_ideal(PLAN, t_end=40.0, tracker=lambda pos, out: np.zeros(3))
    modes = [m for _, m, _, _ in trace]
    t_takeoff = next(t for t, m, _, _ in trace if m == Mode.TAKEOFF)
    t_land = next(t for t, m, _, _ in trace if m == Mode.LAND)
    assert ms.aborted
    assert abs(t_land - t_takeoff - PLAN.timeout) < 0.011
    assert Mode.FLY_TO_GRASP not in modes
    assert events == []


def test_abort_while_carrying_detaches():
    def stall_in_transport(pos, out):
        return pos if out.state.mode == Mode.TRANSPORT else out.setpoint[:3].copy()

    ms, trace, events = run_ideal(PLAN, t_end=60.0, tracker=stall_in_transport)
    assert ms.aborted
    assert [e for _, e, _ in events] == ["attach", "detach"]
    assert events[1][2] == Mode.LAND


def test_illegal_transitions_rejected():
    with pytest.raises(FsmError):
        check_trace(["Idle", "Transport"])
    ms = new_mission(PLAN)
    with pytest.raises(FsmError):
        _enter(ms, Mode.DEFLATING, 0.0, PLAN, (0, 0))
    check_trace(["Idle", "Takeoff", "Land", "Done"])


def test_idle_and_done_are_disarmed():
    assert Mode.IDLE not in ARMED and Mode.DONE not in ARMED
    assert Mode.LAND in ARMED


def test_plan_validation():
    with pytest.raises(ValueError):
        MissionPlan((0, 0, 1), (1, 1, 1), tolerance=0.0)
