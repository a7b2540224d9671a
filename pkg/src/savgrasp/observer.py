"""EKF disturbance observer.

State ``chi = [P, V, d_B]`` (world position, world velocity, body-frame
acceleration disturbance). Process model, with attitude and thrust held over
one sample::

    Pdot = V
    Vdot = R(Theta) (-T/m_nominal e_z) + g e_down + R(Theta) d_B
    d_B_dot = 0

Measurement ``z = [P_meas, V_meas, a_B_meas + (0, 0, t_m)]`` with
``t_m = u_thrust / m_nominal``; the predicted measurement is ``chi`` itself,
so the measurement Jacobian is the identity.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .dynamics import E_DOWN, GRAVITY, SensorFrame, rk4, rotation_matrix, thrust_acceleration

log = logging.getLogger(__name__)

NX = 9


class ObserverFault(RuntimeError):
    pass


@dataclass
class ObserverConfig:
    dt: float = 0.01
    q_p: float = 2.0
    q_v: float = 2.0
    q_d: tuple = (4.2, 4.2, 3.5)
    r_p: float = 4.0
    r_v: float = 4.0
    r_a: float = 2.0
    P0_kinematic: float = 1e-2
    P0_disturbance: float = 1.0
    # 0 freezes the estimate at its initial value (observer-off equivalence)
    gain_scale: float = 1.0

    def __post_init__(self):
        self.q_d = tuple(float(q) for q in self.q_d)
        exps = (self.q_p, self.q_v, self.r_p, self.r_v, self.r_a) + self.q_d
        if self.dt <= 0 or min(exps) <= 0:
            raise ValueError("dt and all covariance exponents must be positive")


@dataclass
class ObserverInput:
    u_thrust: float
    m_nominal: float
    Theta: np.ndarray
    g: float = GRAVITY

    @property
    def t_m(self) -> float:
        """Thrust-to-hover ratio times gravity: (T / (m g)) g = T / m."""
        return self.u_thrust / self.m_nominal


@dataclass
class ObserverState:
    chi: np.ndarray
    Pcov: np.ndarray
    t_last: float
    innovation: np.ndarray = field(default_factory=lambda: np.zeros(NX))

    @property
    def d_B(self) -> np.ndarray:
        return self.chi[6:9]


def make_Q(cfg: ObserverConfig) -> np.ndarray:
    dt = cfg.dt
    diag = np.concatenate([
        np.full(3, dt ** cfg.q_p / cfg.q_p),
        np.full(3, dt ** cfg.q_v / cfg.q_v),
        [dt ** q for q in cfg.q_d],
    ])
    return np.diag(diag)


def make_R(cfg: ObserverConfig) -> np.ndarray:
    dt = cfg.dt
    diag = np.concatenate([
        np.full(3, dt ** cfg.r_p),
        np.full(3, dt ** cfg.r_v),
        np.full(3, dt ** cfg.r_a / cfg.r_a),
    ])
    return np.diag(diag)


def initial_state(frame: SensorFrame, cfg: ObserverConfig) -> ObserverState:
    chi = np.concatenate([frame.P_meas, frame.V_meas, np.zeros(3)])
    Pcov = np.diag([cfg.P0_kinematic] * 6 + [cfg.P0_disturbance] * 3)
    return ObserverState(chi, Pcov, frame.t_stamp)


def process_model(chi: np.ndarray, inp: ObserverInput) -> np.ndarray:
    R = rotation_matrix(inp.Theta)
    dchi = np.zeros(NX)
    dchi[0:3] = chi[3:6]
    dchi[3:6] = thrust_acceleration(inp.Theta, inp.u_thrust / inp.m_nominal) + inp.g * E_DOWN + R @ chi[6:9]
    return dchi


def process_jacobian(Theta) -> np.ndarray:
    """Continuous-time Jacobian of ``process_model`` with respect to chi."""
    A = np.zeros((NX, NX))
    A[0:3, 3:6] = np.eye(3)
    A[3:6, 6:9] = rotation_matrix(Theta)
    return A


def transition_matrix(Theta, dt: float) -> np.ndarray:
    """Jacobian of the one-step RK4 map.

    The model is affine in chi, so the RK4 map's Jacobian is the fourth-order
    Taylor polynomial of exp(A dt); A is nilpotent (A^3 = 0) so this equals
    exp(A dt) exactly.
    """
    Ah = process_jacobian(Theta) * dt
    Ah2 = Ah @ Ah
    return np.eye(NX) + Ah + Ah2 / 2.0 + Ah2 @ Ah / 6.0 + Ah2 @ Ah2 / 24.0


def measurement_model(chi: np.ndarray) -> np.ndarray:
    return chi.copy()


def measurement_jacobian(chi: np.ndarray | None = None) -> np.ndarray:
    return np.eye(NX)


def corrected_measurement(frame: SensorFrame, inp: ObserverInput) -> np.ndarray:
    a = np.array(frame.a_B_meas, dtype=float)
    a[2] += inp.t_m
    return np.concatenate([frame.P_meas, frame.V_meas, a])


def _symmetrize(P: np.ndarray) -> np.ndarray:
    return 0.5 * (P + P.T)


def predict(st: ObserverState, inp: ObserverInput, cfg: ObserverConfig) -> ObserverState:
    chi = rk4(lambda c: process_model(c, inp), st.chi, cfg.dt)
    F = transition_matrix(inp.Theta, cfg.dt)
    Pcov = _symmetrize(F @ st.Pcov @ F.T + make_Q(cfg))
    if not (np.all(np.isfinite(chi)) and np.all(np.isfinite(Pcov))):
        raise ObserverFault("non-finite observer prediction")
    return ObserverState(chi, Pcov, st.t_last + cfg.dt, st.innovation)


def update(st: ObserverState, frame: SensorFrame, inp: ObserverInput, cfg: ObserverConfig) -> ObserverState:
    if abs(frame.t_stamp - st.t_last) > 1e-6:
        raise ValueError(f"sensor frame at t={frame.t_stamp} does not match observer tick t={st.t_last}")
    H = measurement_jacobian(st.chi)
    y = corrected_measurement(frame, inp) - measurement_model(st.chi)
    S = H @ st.Pcov @ H.T + make_R(cfg)
    try:
        K = np.linalg.solve(S, H @ st.Pcov).T
    except np.linalg.LinAlgError as exc:
        raise ObserverFault("singular innovation covariance") from exc
    K = cfg.gain_scale * K
    chi = st.chi + K @ y
    # Joseph form stays PSD for any gain, including a scaled one
    IKH = np.eye(NX) - K @ H
    Pcov = _symmetrize(IKH @ st.Pcov @ IKH.T + K @ make_R(cfg) @ K.T)
    if not (np.all(np.isfinite(chi)) and np.all(np.isfinite(Pcov))):
        raise ObserverFault("non-finite observer update")
    return ObserverState(chi, Pcov, st.t_last, y)


def kalman_gain(Pcov: np.ndarray, R: np.ndarray) -> np.ndarray:
    H = measurement_jacobian()
    return np.linalg.solve(H @ Pcov @ H.T + R, H @ Pcov).T


def disturbance_world(st: ObserverState, Theta) -> np.ndarray:
    return rotation_matrix(Theta) @ st.d_B


class DisturbanceObserver:
    """Stateful wrapper used by the control loop.

    A fault during predict or update resets the filter to its prior around
    the latest measurement instead of propagating.
    """

    def __init__(self, cfg: ObserverConfig | None = None):
        self.cfg = cfg or ObserverConfig()
        self.state: ObserverState | None = None
        self.resets = 0

    def step(self, frame: SensorFrame, inp: ObserverInput) -> ObserverState:
        if self.state is None:
            self.state = initial_state(frame, self.cfg)
            return self.state
        try:
            st = predict(self.state, inp, self.cfg)
            self.state = update(st, frame, inp, self.cfg)
        except ObserverFault as exc:
            log.warning("observer reset at t=%.3f: %s", frame.t_stamp, exc)
            self.resets += 1
            self.state = initial_state(frame, self.cfg)
        return self.state

    def innovation_norms(self) -> np.ndarray:
        y = self.state.innovation if self.state is not None else np.zeros(NX)
        return np.array([np.linalg.norm(y[0:3]), np.linalg.norm(y[3:6]), np.linalg.norm(y[6:9])])
