"""Attitude loop standing in for the flight controller.

PD on Euler-angle error with body-rate damping, scaled by inertia so the
gains are angular accelerations. With the default gains each tilt axis is a
critically damped second-order system (double pole at -5 rad/s); the NMPC
uses first-order time constants fitted to this loop, not design targets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import VehicleParams, VehicleState, WrenchInput
from .nmpc import AttitudeThrustCommand


@dataclass
class AttitudeGains:
    Kp_att: np.ndarray = field(default_factory=lambda: np.array([25.0, 25.0, 25.0]))
    Kd_att: np.ndarray = field(default_factory=lambda: np.array([10.0, 10.0, 10.0]))
    yaw_rate_limit: float = 2.0

    def __post_init__(self):
        self.Kp_att = np.asarray(self.Kp_att, dtype=float)
        self.Kd_att = np.asarray(self.Kd_att, dtype=float)
        if np.any(self.Kp_att <= 0) or np.any(self.Kd_att <= 0) or self.yaw_rate_limit <= 0:
            raise ValueError("attitude gains must be positive")


def wrap_angle(a: float) -> float:
    return (a + math.pi) % (2.0 * math.pi) - math.pi


def attitude_control(cmd: AttitudeThrustCommand, state: VehicleState, gains: AttitudeGains,
                     params: VehicleParams):
    """Return the wrench and a per-channel saturation flag array (T, tx, ty, tz)."""
    err = np.array([
        cmd.phi_cmd - state.Theta[0],
        cmd.theta_cmd - state.Theta[1],
        wrap_angle(cmd.psi_cmd - state.Theta[2]),
    ])
    # yaw error converts to a rate demand first so large heading changes stay rate-limited
    yaw_rate_dem = np.clip(gains.Kp_att[2] / gains.Kd_att[2] * err[2], -gains.yaw_rate_limit, gains.yaw_rate_limit)
    acc = gains.Kp_att * err - gains.Kd_att * state.omega
    acc[2] = gains.Kd_att[2] * (yaw_rate_dem - state.omega[2])
    tau_raw = params.I * acc
    tau = np.clip(tau_raw, -params.tau_max, params.tau_max)
    T = min(max(cmd.T_cmd, 0.0), params.T_max)
    sat = np.array([T != cmd.T_cmd, *(tau != tau_raw)])
    return WrenchInput(T, tau), sat
