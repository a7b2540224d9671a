"""Rigid-body quadrotor plant with payload, slosh, ground effect and sensors.

Frames
------
World frame is North-East-Down (z positive down). Body frame is
Forward-Right-Down; thrust acts along body -z. ``rotation_matrix`` maps body
vectors into the world frame using the Z-Y-X (yaw-pitch-roll) sequence.

Accelerometer convention
------------------------
``sense`` reports the body-frame specific force::

    a_B_meas = R(Theta)^T (Vdot_true - g e_down) + bias + noise

At hover this reads ``(0, 0, -g)``. Adding the thrust-to-hover term
``t_m = T / m_nominal`` to the z channel therefore cancels the thrust and
gravity contributions and leaves exactly the body-frame acceleration that
the nominal model does not explain; the disturbance observer uses that
corrected signal as its direct measurement of ``d_B``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

GRAVITY = 9.81
E_DOWN = np.array([0.0, 0.0, 1.0])


class SimulationFault(RuntimeError):
    """Raised when the plant leaves its valid operating envelope."""


class GimbalLockFault(SimulationFault):
    pass


class PayloadStateError(SimulationFault):
    """Double attach or detach without an attached payload."""


@dataclass
class VehicleState:
    P: np.ndarray = field(default_factory=lambda: np.zeros(3))
    V: np.ndarray = field(default_factory=lambda: np.zeros(3))
    Theta: np.ndarray = field(default_factory=lambda: np.zeros(3))
    omega: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.P, self.V, self.Theta, self.omega]).astype(float)

    @classmethod
    def from_vector(cls, x: np.ndarray) -> "VehicleState":
        x = np.asarray(x, dtype=float)
        return cls(x[0:3].copy(), x[3:6].copy(), x[6:9].copy(), x[9:12].copy())


@dataclass
class WrenchInput:
    T: float = 0.0
    tau: np.ndarray = field(default_factory=lambda: np.zeros(3))


@dataclass
class VehicleParams:
    """Airframe constants.

    ``m`` is the airframe including the deflated gripper; ``arm_length`` is
    informational only.
    """

    m: float = 1.002
    g: float = GRAVITY
    I: np.ndarray = field(default_factory=lambda: np.array([0.010, 0.010, 0.018]))
    T_max: float = 25.0
    tau_max: float = 0.5
    arm_length: float = 0.125

    def __post_init__(self):
        self.I = np.asarray(self.I, dtype=float)
        if self.m <= 0 or np.any(self.I <= 0):
            raise ValueError("mass and inertia must be positive")
        if self.T_max <= self.m * self.g:
            raise ValueError("T_max must exceed the hover thrust")


@dataclass
class AttachedPayload:
    mass: float
    offset: np.ndarray = field(default_factory=lambda: np.zeros(3))
    mode: str = "static"
    pendulum_length: float = 0.25
    damping_ratio: float = 0.05
    slosh_fraction: float = 0.5

    def __post_init__(self):
        self.offset = np.asarray(self.offset, dtype=float)
        if self.mass < 0:
            raise ValueError("payload mass must be non-negative")
        if not 0.0 <= self.slosh_fraction <= 1.0:
            raise ValueError("slosh fraction must lie in [0, 1]")
        if self.mode not in ("static", "slosh"):
            raise ValueError(f"unknown payload mode {self.mode!r}")

    @property
    def slosh_mass(self) -> float:
        return self.mass * self.slosh_fraction if self.mode == "slosh" else 0.0


@dataclass
class NoiseConfig:
    sigma_p: float = 0.0
    sigma_v: float = 0.0
    sigma_a: float = 0.0
    accel_bias: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.accel_bias = np.asarray(self.accel_bias, dtype=float)
        if min(self.sigma_p, self.sigma_v, self.sigma_a) < 0:
            raise ValueError("noise standard deviations must be >= 0")


@dataclass
class SensorFrame:
    P_meas: np.ndarray
    V_meas: np.ndarray
    a_B_meas: np.ndarray
    t_stamp: float


@dataclass
class GroundEffectConfig:
    enabled: bool = True
    rho: float = 1.0
    r_prop: float = 0.064
    ground_z: float = 0.0


def rotation_matrix(Theta) -> np.ndarray:
    """Body-to-world rotation, Z-Y-X Euler sequence."""
    phi, theta, psi = Theta
    cf, sf = math.cos(phi), math.sin(phi)
    ct, st = math.cos(theta), math.sin(theta)
    cp, sp = math.cos(psi), math.sin(psi)
    return np.array([
        [ct * cp, sf * st * cp - cf * sp, cf * st * cp + sf * sp],
        [ct * sp, sf * st * sp + cf * cp, cf * st * sp - sf * cp],
        [-st, sf * ct, cf * ct],
    ])


def euler_rate_matrix(Theta) -> np.ndarray:
    """Maps body rates (p, q, r) to Euler angle rates."""
    phi, theta, _ = Theta
    cf, sf = math.cos(phi), math.sin(phi)
    ct, tt = math.cos(theta), math.tan(theta)
    return np.array([
        [1.0, sf * tt, cf * tt],
        [0.0, cf, -sf],
        [0.0, sf / ct, cf / ct],
    ])


def thrust_acceleration(Theta, specific_thrust: float) -> np.ndarray:
    """World-frame acceleration produced by thrust along body -z."""
    phi, theta, psi = Theta
    cf, sf = math.cos(phi), math.sin(phi)
    ct, st = math.cos(theta), math.sin(theta)
    cp, sp = math.cos(psi), math.sin(psi)
    return -specific_thrust * np.array([
        cf * st * cp + sf * sp,
        cf * st * sp - sf * cp,
        cf * ct,
    ])


def _cross(a, b) -> np.ndarray:
    return np.array([a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]])


def _check_state(x: np.ndarray) -> None:
    if not np.all(np.isfinite(x)):
        raise SimulationFault("non-finite vehicle state")
    if abs(x[7]) >= 0.5 * math.pi or abs(x[6]) >= 0.5 * math.pi:
        raise GimbalLockFault(f"attitude left the valid envelope: phi={x[6]:.3f}, theta={x[7]:.3f}")


def derivative_vec(x, T, tau, params: VehicleParams, d_W, mass=None, torque=None) -> np.ndarray:
    """Time derivative of the 12-vector [P, V, Theta, omega]."""
    _check_state(x)
    m = params.m if mass is None else mass
    Theta = x[6:9]
    omega = x[9:12]
    dx = np.empty(12)
    dx[0:3] = x[3:6]
    dx[3:6] = thrust_acceleration(Theta, T / m) + params.g * E_DOWN + d_W
    dx[6:9] = euler_rate_matrix(Theta) @ omega
    I = params.I
    tau_total = np.asarray(tau, dtype=float) if torque is None else np.asarray(tau, dtype=float) + torque
    dx[9:12] = (tau_total - _cross(omega, I * omega)) / I
    return dx


def derivative(state: VehicleState, u: WrenchInput, params: VehicleParams, d_W,
               mass: float | None = None, torque=None) -> VehicleState:
    """State derivative packed as a ``VehicleState`` of rates."""
    if not (np.isfinite(u.T) and np.all(np.isfinite(u.tau)) and np.all(np.isfinite(d_W))):
        raise SimulationFault("non-finite input")
    dx = derivative_vec(state.as_vector(), u.T, u.tau, params, np.asarray(d_W, float), mass, torque)
    return VehicleState.from_vector(dx)


def rk4(f, x: np.ndarray, h: float) -> np.ndarray:
    k1 = f(x)
    k2 = f(x + 0.5 * h * k1)
    k3 = f(x + 0.5 * h * k2)
    k4 = f(x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def step_rk4(state: VehicleState, u: WrenchInput, params: VehicleParams, d_W, h: float,
             mass: float | None = None, torque=None) -> VehicleState:
    if h <= 0:
        raise ValueError("step size must be positive")
    d_W = np.asarray(d_W, dtype=float)
    x = rk4(lambda z: derivative_vec(z, u.T, u.tau, params, d_W, mass, torque), state.as_vector(), h)
    _check_state(x)
    return VehicleState.from_vector(x)


def ground_effect_multiplier(height: float, cfg: GroundEffectConfig) -> float:
    """Thrust multiplier ``1 / (1 - rho (r / 4z)^2)`` below five rotor radii."""
    r = cfg.r_prop
    if not cfg.enabled or height >= 5.0 * r:
        return 1.0
    z = max(height, 0.5 * r)
    return 1.0 / (1.0 - cfg.rho * (r / (4.0 * z)) ** 2)


class World:
    """Mutable simulation world: plant parameters, payload and disturbance sources.

    The integrated state is a 16-vector: the 12 vehicle states followed by the
    slosh pendulum's horizontal displacement and rate (xi_x, xi_y, xi_dot_x,
    xi_dot_y), in metres and m/s.
    """

    def __init__(self, params: VehicleParams, ground: GroundEffectConfig | None = None,
                 battery_decay: float = 0.0, wind=(0.0, 0.0, 0.0), d_max: float = 20.0,
                 ground_contact: bool = True):
        self.params = params
        self.ground = ground or GroundEffectConfig()
        self.battery_decay = battery_decay
        self.wind = np.asarray(wind, dtype=float)
        self.d_max = d_max
        self.ground_contact = ground_contact
        self.payload: AttachedPayload | None = None
        self.slosh = np.zeros(4)
        self.t = 0.0
        self.thrust_enabled = True

    @property
    def m_total(self) -> float:
        return self.params.m + (self.payload.mass if self.payload else 0.0)

    def attach_payload(self, payload: AttachedPayload) -> None:
        if self.payload is not None:
            raise PayloadStateError("a payload is already attached")
        self.payload = payload
        self.slosh = np.zeros(4)

    def detach_payload(self) -> AttachedPayload:
        if self.payload is None:
            raise PayloadStateError("no payload to detach")
        payload, self.payload = self.payload, None
        self.slosh = np.zeros(4)
        return payload

    def height(self, x) -> float:
        return self.ground.ground_z - x[2]

    def thrust_gain(self, x, t: float) -> float:
        return max(0.0, 1.0 - self.battery_decay * t) * ground_effect_multiplier(self.height(x), self.ground)

    def payload_torque(self, x) -> np.ndarray:
        p = self.payload
        if p is None or not np.any(p.offset):
            return np.zeros(3)
        weight_B = rotation_matrix(x[6:9]).T @ (p.mass * self.params.g * E_DOWN)
        return _cross(p.offset, weight_B)

    def _slosh_terms(self):
        p = self.payload
        m_s = p.slosh_mass if p else 0.0
        if m_s <= 0.0:
            return 0.0, 0.0, 0.0
        wn = math.sqrt(self.params.g / p.pendulum_length)
        return m_s / self.m_total, wn, p.damping_ratio

    def disturbance(self, x, T: float, t: float, xs=None) -> np.ndarray:
        """Summed world-frame acceleration disturbance acting on the vehicle."""
        xs = self.slosh if xs is None else xs
        m = self.m_total
        a_thrust = thrust_acceleration(x[6:9], T / m)
        d = (self.thrust_gain(x, t) - 1.0) * a_thrust + self.wind
        c, wn, zeta = self._slosh_terms()
        if c > 0.0:
            a0 = a_thrust + self.params.g * E_DOWN + d
            spring = wn * wn * xs[0:2] + 2.0 * zeta * wn * xs[2:4]
            d = d.copy()
            d[0:2] += c * (spring + a0[0:2]) / (1.0 - c)
        return d

    def augmented_derivative(self, z, u: WrenchInput, t: float) -> np.ndarray:
        x, xs = z[:12], z[12:]
        T = u.T if self.thrust_enabled else 0.0
        d = self.disturbance(x, T, t, xs)
        if not np.all(np.isfinite(d)) or np.linalg.norm(d) > self.d_max:
            raise SimulationFault(f"disturbance magnitude {np.linalg.norm(d):.3f} exceeds bound")
        dx = derivative_vec(x, T, u.tau, self.params, d, self.m_total, self.payload_torque(x))
        dz = np.zeros(16)
        dz[:12] = dx
        c, wn, zeta = self._slosh_terms()
        if c > 0.0:
            dz[12:14] = xs[2:4]
            dz[14:16] = -wn * wn * xs[0:2] - 2.0 * zeta * wn * xs[2:4] - dx[3:5]
        return dz

    def on_ground(self, x) -> bool:
        return self.ground_contact and x[2] >= self.ground.ground_z - 1e-9

    def _resting(self, x, u: WrenchInput, t: float) -> bool:
        if not self.on_ground(x):
            return False
        T = u.T if self.thrust_enabled else 0.0
        az = thrust_acceleration(x[6:9], T * self.thrust_gain(x, t) / self.m_total)[2] + self.params.g
        return az + self.wind[2] >= 0.0 and x[5] >= 0.0

    def step(self, state: VehicleState, u: WrenchInput, h: float) -> VehicleState:
        """Advance the vehicle (and slosh) by ``h`` seconds with RK4."""
        x = state.as_vector()
        if self._resting(x, u, self.t):
            x[3:6] = 0.0
            x[9:12] = 0.0
            self.t += h
            return VehicleState.from_vector(x)
        z = np.concatenate([x, self.slosh])
        t0 = self.t
        z = rk4(lambda s: self.augmented_derivative(s, u, t0), z, h)
        x = z[:12]
        if self.ground_contact and x[2] > self.ground.ground_z:
            x[2] = self.ground.ground_z
            x[3:6] = 0.0
            x[9:12] = 0.0
        _check_state(x)
        self.slosh = z[12:]
        self.t += h
        return VehicleState.from_vector(x)

    def acceleration(self, state: VehicleState, u: WrenchInput) -> np.ndarray:
        """True inertial acceleration of the vehicle at the current instant."""
        x = state.as_vector()
        if self._resting(x, u, self.t):
            return np.zeros(3)
        z = np.concatenate([x, self.slosh])
        return self.augmented_derivative(z, u, self.t)[3:6]


def effective_disturbance(world: World, state: VehicleState, u: WrenchInput) -> np.ndarray:
    """World-frame disturbance from ground effect, battery sag, slosh and wind.

    Payload mass does not appear here; it acts through the total mass.
    """
    T = u.T if world.thrust_enabled else 0.0
    return world.disturbance(state.as_vector(), T, world.t)


def attach_payload(world: World, payload: AttachedPayload) -> World:
    world.attach_payload(payload)
    return world


def detach_payload(world: World) -> World:
    world.detach_payload()
    return world


def sense(state: VehicleState, Vdot_true, params: VehicleParams, noise: NoiseConfig,
          rng: np.random.Generator, t: float) -> SensorFrame:
    """Sample mocap position, FCU velocity and IMU specific force."""
    R = rotation_matrix(state.Theta)
    specific_force = R.T @ (np.asarray(Vdot_true, float) - params.g * E_DOWN)
    return SensorFrame(
        P_meas=state.P + noise.sigma_p * rng.standard_normal(3),
        V_meas=state.V + noise.sigma_v * rng.standard_normal(3),
        a_B_meas=specific_force + noise.accel_bias + noise.sigma_a * rng.standard_normal(3),
        t_stamp=t,
    )


__all__ = [
    "GRAVITY", "E_DOWN", "SimulationFault", "GimbalLockFault", "PayloadStateError",
    "VehicleState", "WrenchInput", "VehicleParams", "AttachedPayload", "NoiseConfig",
    "SensorFrame", "GroundEffectConfig", "World", "rotation_matrix", "euler_rate_matrix",
    "thrust_acceleration", "derivative", "derivative_vec", "rk4", "step_rk4",
    "ground_effect_multiplier", "effective_disturbance", "attach_payload", "detach_payload",
    "sense",
]
