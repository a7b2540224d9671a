import math

import numpy as np
import pytest

from savgrasp.dynamics import GRAVITY
from savgrasp.pid import PidController, PidGains, PidState, pid_step

M = 1.002


def test_hover_at_setpoint():
    cmd = pid_step(np.zeros(3), np.zeros(3), [0, 0, 0, 0], PidGains(), 0.01, PidState(), M)
    assert math.isclose(cmd.T_cmd, M * GRAVITY)
    assert cmd.phi_cmd == 0.0 and cmd.theta_cmd == 0.0


@pytest.mark.parametrize("sp,check", [
    ([1, 0, 0, 0], lambda c: c.theta_cmd < 0),       # north: nose down
    ([0, 1, 0, 0], lambda c: c.phi_cmd > 0),         # east: roll right
    ([0, 0, -1, 0], lambda c: c.T_cmd > M * GRAVITY),  # up: more thrust
])
def test_command_directions(sp, check):
    assert check(pid_step(np.zeros(3), np.zeros(3), sp, PidGains(), 0.01, PidState(), M))


def test_heading_rotates_tilt():
    c = pid_step(np.zeros(3), np.zeros(3), [1, 0, 0, math.pi / 2], PidGains(), 0.01, PidState(), M)
    # facing east, a north demand is a leftward (negative roll) tilt
    assert c.phi_cmd < 0 and abs(c.theta_cmd) < 1e-12


def test_tilt_compensated_thrust():
    c = pid_step(np.zeros(3), np.zeros(3), [0, 0, 0, 0], PidGains(), 0.01, PidState(), M,
                 acc_ff=np.array([2.0, 0.0, 0.0]))
    vertical = c.T_cmd * math.cos(c.phi_cmd) * math.cos(c.theta_cmd)
    assert math.isclose(vertical, M * GRAVITY, rel_tol=1e-12)


def test_feed_forward_velocity_removes_lag():
    g = PidGains()
    c = pid_step(np.zeros(3), np.array([1.0, 0, 0]), [0, 0, 0, 0], g, 0.01, PidState(), M,
                 vel_ff=np.array([1.0, 0, 0]))
    assert abs(c.theta_cmd) < 1e-12


def test_integrator_removes_constant_bias():
    # plant: vertical double integrator with an unmodelled downward acceleration
    g = PidGains()
    st = PidState()
    z, v, dt, bias = 0.0, 0.0, 0.01, 1.5
    for _ in range(3000):
        c = pid_step([0, 0, z], [0, 0, v], [0, 0, 0, 0], g, dt, st, M)
        a = GRAVITY - c.T_cmd / M + bias
        v += a * dt
        z += v * dt
    assert abs(z) < 1e-3


def test_anti_windup_freezes_saturated_axis():
    g = PidGains(tilt_max=math.radians(5))
    st = PidState()
    for _ in range(200):
        c = pid_step(np.zeros(3), np.zeros(3), [20, 0, 0, 0], g, 0.01, st, M)
    assert c.theta_cmd == -g.tilt_max
    assert st.integrator[0] == 0.0


def test_integrator_clamped():
    g = PidGains(integrator_limit=np.array([0.1, 0.1, 0.1]), acc_limit=np.array([50.0, 50, 50]),
                 tilt_max=1.4, T_max=1e3)
    st = PidState()
    for _ in range(500):
        pid_step(np.zeros(3), np.zeros(3), [0, 0, -1, 0], g, 0.01, st, M)
    assert abs(st.integrator[2]) <= 0.1 + 1e-15


def test_controller_reset():
    ctrl = PidController()
    ctrl.step(np.zeros(3), np.zeros(3), [0, 0, -1, 0], 0.01)
    assert np.any(ctrl.state.integrator != 0)
    ctrl.reset()
    assert np.all(ctrl.state.integrator == 0)


def test_validation():
    with pytest.raises(ValueError):
        pid_step(np.zeros(3), np.zeros(3), [0, 0, 0, 0], PidGains(), 0.0, PidState(), M)
    with pytest.raises(ValueError):
        PidGains(vel_kp=np.array([-1.0, 1, 1]))
