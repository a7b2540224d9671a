"""Cascaded PID position controller used as a baseline.

Position error -> velocity setpoint (P), velocity error -> acceleration
demand (PID with clamped, conditionally frozen integrator), acceleration
demand -> thrust and tilt commands by small-angle inversion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import GRAVITY
from .nmpc import AttitudeThrustCommand


def _vec(v):
    return field(default_factory=lambda: np.array(v, dtype=float))


@dataclass
class PidGains:
    pos_kp: np.ndarray = _vec([0.6, 0.6, 1.5])
    vel_kp: np.ndarray = _vec([3.0, 3.0, 4.0])
    vel_ki: np.ndarray = _vec([0.3, 0.3, 2.0])
    vel_kd: np.ndarray = _vec([0.0, 0.0, 0.0])
    integrator_limit: np.ndarray = _vec([2.0, 2.0, 4.0])
    vel_limit: np.ndarray = _vec([2.5, 2.5, 1.5])
    acc_limit: np.ndarray = _vec([5.0, 5.0, 6.0])
    tilt_max: float = math.radians(30.0)
    T_max: float = 25.0

    def __post_init__(self):
        for name in ("pos_kp", "vel_kp", "vel_ki", "vel_kd", "integrator_limit", "vel_limit", "acc_limit"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        if np.any(self.integrator_limit <= 0) or np.any(self.vel_limit <= 0) or np.any(self.acc_limit <= 0):
            raise ValueError("limits must be positive")
        if self.tilt_max <= 0 or self.T_max <= 0:
            raise ValueError("limits must be positive")
        for name in ("pos_kp", "vel_kp", "vel_ki", "vel_kd"):
            if np.any(getattr(self, name) < 0):
                raise ValueError("gains must be non-negative")


@dataclass
class PidState:
    integrator: np.ndarray = _vec([0.0, 0.0, 0.0])
    prev_vel: np.ndarray | None = None


def pid_step(P, V, setpoint, gains: PidGains, dt: float, st: PidState,
             m_nominal: float, g: float = GRAVITY, vel_ff=None, acc_ff=None) -> AttitudeThrustCommand:
    """One control update; ``setpoint`` is (x, y, z, yaw) in NED. Mutates ``st``.

    ``vel_ff`` and ``acc_ff`` are optional trajectory feed-forward terms.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    P = np.asarray(P, dtype=float)
    V = np.asarray(V, dtype=float)
    sp = np.asarray(setpoint, dtype=float)
    psi = float(sp[3]) if sp.size > 3 else 0.0

    v_ff = np.zeros(3) if vel_ff is None else np.asarray(vel_ff, dtype=float)
    a_ff = np.zeros(3) if acc_ff is None else np.asarray(acc_ff, dtype=float)
    v_sp = np.clip(gains.pos_kp * (sp[:3] - P), -gains.vel_limit, gains.vel_limit) + v_ff
    e_v = v_sp - V
    # derivative on measurement avoids setpoint kick
    dv = np.zeros(3) if st.prev_vel is None else (V - st.prev_vel) / dt
    st.prev_vel = V.copy()
    a_raw = gains.vel_kp * e_v + gains.vel_ki * st.integrator - gains.vel_kd * dv + a_ff
    a = np.clip(a_raw, -gains.acc_limit, gains.acc_limit)

    a_fwd = math.cos(psi) * a[0] + math.sin(psi) * a[1]
    a_right = -math.sin(psi) * a[0] + math.cos(psi) * a[1]
    lift = g - a[2]
    theta = -math.atan2(a_fwd, lift)
    phi = math.atan2(a_right * math.cos(theta), lift)
    # tilt compensation keeps the vertical thrust component at m (g - a_z)
    T = m_nominal * lift / (math.cos(phi) * math.cos(theta))
    T_sat = min(max(T, 0.0), gains.T_max)
    theta_sat = min(max(theta, -gains.tilt_max), gains.tilt_max)
    phi_sat = min(max(phi, -gains.tilt_max), gains.tilt_max)

    # freeze an axis' integrator while its output is saturated in the error's direction
    saturated = a != a_raw
    saturated[2] |= T_sat != T
    saturated[0] |= theta_sat != theta
    saturated[1] |= phi_sat != phi
    grow = np.sign(e_v) == np.sign(a_raw)
    integrate = ~(saturated & grow)
    st.integrator = np.where(integrate, st.integrator + e_v * dt, st.integrator)
    st.integrator = np.clip(st.integrator, -gains.integrator_limit, gains.integrator_limit)
    return AttitudeThrustCommand(T_sat, phi_sat, theta_sat, psi)


class PidController:
    def __init__(self, gains: PidGains | None = None, m_nominal: float = 1.002, g: float = GRAVITY):
        self.gains = gains or PidGains()
        self.m_nominal = m_nominal
        self.g = g
        self.state = PidState()

    def reset(self) -> None:
        self.state = PidState()

    def step(self, P, V, setpoint, dt: float, vel_ff=None, acc_ff=None) -> AttitudeThrustCommand:
        return pid_step(P, V, setpoint, self.gains, dt, self.state, self.m_nominal, self.g, vel_ff, acc_ff)
