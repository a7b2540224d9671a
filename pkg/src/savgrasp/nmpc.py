"""Outer-loop NMPC on the reduced model [P, V, phi, theta].

Inputs are collective thrust (N) and roll/pitch commands (rad) for the inner
attitude loop; yaw is held at a constant reference and is not a state.
The optimal control problem is transcribed by multiple shooting with one
RK4 step per stage, linearized about the previous solution (Gauss-Newton),
condensed onto the input sequence and handed to the active-set QP solver.

Roll and pitch states follow first-order lags of their commands, so the box
on the commands also bounds the predicted angles; no separate state
constraints are imposed.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from . import qp
from .dynamics import GRAVITY

NX = 8
NU = 3


@dataclass
class NmpcModel:
    tau_phi: float = 0.3
    tau_theta: float = 0.3
    m_nominal: float = 1.002
    g: float = GRAVITY

    def __post_init__(self):
        if self.tau_phi <= 0 or self.tau_theta <= 0:
            raise ValueError("attitude time constants must be positive")


@dataclass
class NmpcConfig:
    N: int = 20
    dt_mpc: float = 0.05
    Q: tuple = (10.0, 10.0, 10.0, 1.0, 1.0, 1.0, 0.5, 0.5)
    QN: tuple | None = None
    R: tuple = (0.1, 5.0, 5.0)
    T_max: float = 25.0
    angle_max: float = math.radians(30.0)
    sqp_iters: int = 1
    qp_max_iter: int = qp.MAX_ITER
    psi: float = 0.0

    def __post_init__(self):
        self.Q = tuple(float(q) for q in self.Q)
        self.QN = tuple(10.0 * q for q in self.Q) if self.QN is None else tuple(float(q) for q in self.QN)
        self.R = tuple(float(r) for r in self.R)
        if self.N < 2:
            raise ValueError("horizon must have at least two stages")
        if min(self.Q + self.QN + self.R) < 0 or max(self.Q) <= 0:
            raise ValueError("weights must be non-negative with at least one positive state weight")
        if not 1 <= self.sqp_iters <= 5:
            raise ValueError("sqp_iters must be between 1 and 5")

    @property
    def u_lower(self) -> np.ndarray:
        return np.array([0.0, -self.angle_max, -self.angle_max])

    @property
    def u_upper(self) -> np.ndarray:
        return np.array([self.T_max, self.angle_max, self.angle_max])


@dataclass
class AttitudeThrustCommand:
    T_cmd: float
    phi_cmd: float = 0.0
    theta_cmd: float = 0.0
    psi_cmd: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.T_cmd, self.phi_cmd, self.theta_cmd])


@dataclass
class HorizonReference:
    """Position, velocity and feed-forward acceleration at the N+1 shooting nodes."""

    pos: np.ndarray
    vel: np.ndarray
    acc: np.ndarray

    @classmethod
    def hold(cls, point, n_nodes: int) -> "HorizonReference":
        p = np.tile(np.asarray(point, dtype=float), (n_nodes, 1))
        return cls(p, np.zeros_like(p), np.zeros_like(p))


@dataclass
class NmpcGuess:
    X: np.ndarray
    U: np.ndarray
    active_set: dict = field(default_factory=dict)
    last_cmd: AttitudeThrustCommand | None = None


@dataclass
class StepInfo:
    sqp_iters: int
    qp_status: str
    fallback: bool
    solve_time_us: float
    qp_iterations: int = 0


def _lift_dir(phi, theta, psi):
    """Unit vector of body -z in world frame, negated: thrust acc = -(T/m) b."""
    cf, sf = np.cos(phi), np.sin(phi)
    ct, st = np.cos(theta), np.sin(theta)
    cp, sp = math.cos(psi), math.sin(psi)
    b = np.stack([cf * st * cp + sf * sp, cf * st * sp - sf * cp, cf * ct], axis=-1)
    db_dphi = np.stack([-sf * st * cp + cf * sp, -sf * st * sp - cf * cp, -sf * ct], axis=-1)
    db_dtheta = np.stack([cf * ct * cp, cf * ct * sp, -cf * st], axis=-1)
    return b, db_dphi, db_dtheta


def predict_model(x, u, d_W, model: NmpcModel, psi: float = 0.0) -> np.ndarray:
    """Reduced-model derivative; accepts single vectors or stacked rows."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    b, _, _ = _lift_dir(x[..., 6], x[..., 7], psi)
    dx = np.empty(x.shape)
    dx[..., 0:3] = x[..., 3:6]
    dx[..., 3:6] = -(u[..., 0:1] / model.m_nominal) * b + np.array([0.0, 0.0, model.g]) + d_W
    dx[..., 6] = (u[..., 1] - x[..., 6]) / model.tau_phi
    dx[..., 7] = (u[..., 2] - x[..., 7]) / model.tau_theta
    return dx


def model_jacobians(x, u, model: NmpcModel, psi: float = 0.0):
    """Continuous Jacobians (A, B) for stacked states (n, 8) and inputs (n, 3)."""
    n = x.shape[0]
    b, db_dphi, db_dtheta = _lift_dir(x[:, 6], x[:, 7], psi)
    s = u[:, 0] / model.m_nominal
    A = np.zeros((n, NX, NX))
    A[:, 0, 3] = A[:, 1, 4] = A[:, 2, 5] = 1.0
    A[:, 3:6, 6] = -s[:, None] * db_dphi
    A[:, 3:6, 7] = -s[:, None] * db_dtheta
    A[:, 6, 6] = -1.0 / model.tau_phi
    A[:, 7, 7] = -1.0 / model.tau_theta
    B = np.zeros((n, NX, NU))
    B[:, 3:6, 0] = -b / model.m_nominal
    B[:, 6, 1] = 1.0 / model.tau_phi
    B[:, 7, 2] = 1.0 / model.tau_theta
    return A, B


def rk4_stage(x, u, d_W, model: NmpcModel, h: float, psi: float = 0.0):
    """One RK4 step for stacked stages, with its exact sensitivities."""
    f = lambda z: predict_model(z, u, d_W, model, psi)
    n = x.shape[0]
    eye = np.broadcast_to(np.eye(NX), (n, NX, NX))
    k1 = f(x)
    A1, B1 = model_jacobians(x, u, model, psi)
    x2 = x + 0.5 * h * k1
    A2, B2 = model_jacobians(x2, u, model, psi)
    k2 = f(x2)
    x3 = x + 0.5 * h * k2
    A3, B3 = model_jacobians(x3, u, model, psi)
    k3 = f(x3)
    x4 = x + h * k3
    A4, B4 = model_jacobians(x4, u, model, psi)
    k4 = f(x4)
    xn = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)

    dk1x, dk1u = A1, B1
    dk2x = A2 @ (eye + 0.5 * h * dk1x)
    dk2u = A2 @ (0.5 * h * dk1u) + B2
    dk3x = A3 @ (eye + 0.5 * h * dk2x)
    dk3u = A3 @ (0.5 * h * dk2u) + B3
    dk4x = A4 @ (eye + h * dk3x)
    dk4u = A4 @ (h * dk3u) + B4
    Ad = eye + (h / 6.0) * (dk1x + 2 * dk2x + 2 * dk3x + dk4x)
    Bd = (h / 6.0) * (dk1u + 2 * dk2u + 2 * dk3u + dk4u)
    return xn, Ad, Bd


def equilibrium_input(acc, d_W, model: NmpcModel, psi: float = 0.0) -> np.ndarray:
    """Thrust and roll/pitch that produce acceleration ``acc`` under ``d_W``.

    Rows of ``acc`` are handled independently; returns (n, 3) or (3,).
    """
    single = np.ndim(acc) == 1
    acc = np.atleast_2d(np.asarray(acc, dtype=float))
    need = acc - np.array([0.0, 0.0, model.g]) - d_W
    thrust_acc = np.linalg.norm(need, axis=1)
    T = model.m_nominal * thrust_acc
    cp, sp = math.cos(psi), math.sin(psi)
    unit = need / np.maximum(thrust_acc, 1e-12)[:, None]
    # rotate by -psi into the heading frame
    bx = cp * unit[:, 0] + sp * unit[:, 1]
    by = -sp * unit[:, 0] + cp * unit[:, 1]
    bz = unit[:, 2]
    phi = np.arcsin(np.clip(by, -1.0, 1.0))
    theta = np.arctan2(-bx, -bz)
    out = np.stack([T, phi, theta], axis=1)
    return out[0] if single else out


def stage_references(ref: HorizonReference, d_W, model: NmpcModel, cfg: NmpcConfig):
    """Output references (N+1, 8) and input references (N, 3)."""
    ueq = np.atleast_2d(equilibrium_input(ref.acc, d_W, model, cfg.psi))
    lo, hi = cfg.u_lower, cfg.u_upper
    ueq = np.clip(ueq, lo, hi)
    Y = np.hstack([ref.pos, ref.vel, ueq[:, 1:3]])
    return Y, ueq[:-1]


def initial_guess(x0, ref: HorizonReference, d_W, model: NmpcModel, cfg: NmpcConfig) -> NmpcGuess:
    _, Uref = stage_references(ref, d_W, model, cfg)
    X = np.tile(np.asarray(x0, dtype=float), (cfg.N + 1, 1))
    return NmpcGuess(X, Uref.copy())


@dataclass
class Transcription:
    qp: qp.QpProblem
    E: np.ndarray
    Su: np.ndarray
    guess: NmpcGuess


def transcribe(x0, ref: HorizonReference, d_W, model: NmpcModel, cfg: NmpcConfig,
               guess: NmpcGuess | None = None) -> Transcription:
    """Linearize the multiple-shooting OCP about ``guess`` and condense to a QP in dU."""
    N = cfg.N
    x0 = np.asarray(x0, dtype=float)
    d_W = np.asarray(d_W, dtype=float)
    if ref.pos.shape[0] != N + 1:
        raise ValueError("reference must provide N + 1 nodes")
    if guess is None:
        guess = initial_guess(x0, ref, d_W, model, cfg)
    Xg, Ug = guess.X, guess.U
    Xn, Ad, Bd = rk4_stage(Xg[:-1], Ug, d_W, model, cfg.dt_mpc, cfg.psi)
    if not (np.all(np.isfinite(Xn)) and np.all(np.isfinite(Ad)) and np.all(np.isfinite(Bd))):
        raise FloatingPointError("non-finite linearization")
    defects = Xn - Xg[1:]

    # stacked deviations: dX = E + Su dU, with dX_0 = x0 - X_0
    E = np.zeros((N + 1, NX))
    E[0] = x0 - Xg[0]
    Su = np.zeros((N + 1, NX, N * NU))
    for k in range(N):
        E[k + 1] = Ad[k] @ E[k] + defects[k]
        Su[k + 1, :, : k * NU] = Ad[k] @ Su[k, :, : k * NU]
        Su[k + 1, :, k * NU:(k + 1) * NU] = Bd[k]
    Su = Su.reshape((N + 1) * NX, N * NU)

    Y, Uref = stage_references(ref, d_W, model, cfg)
    w = np.concatenate([np.tile(cfg.Q, N), cfg.QN])
    r = (Xg + E - Y).ravel()
    rw = np.tile(cfg.R, N)
    H = Su.T @ (w[:, None] * Su) + np.diag(rw)
    H = 0.5 * (H + H.T)
    f = Su.T @ (w * r) + rw * (Ug - Uref).ravel()
    lb = (np.tile(cfg.u_lower, N) - Ug.ravel())
    ub = (np.tile(cfg.u_upper, N) - Ug.ravel())
    problem = qp.QpProblem(qp.regularize(H), f, lb=lb, ub=ub)
    return Transcription(problem, E, Su, guess)


def horizon_cost(x0, U, ref: HorizonReference, d_W, model: NmpcModel, cfg: NmpcConfig) -> float:
    """Nonlinear single-shooting cost 1/2 sum ||y - y_ref||^2_W + ||u - u_ref||^2_R."""
    U = np.asarray(U, dtype=float).reshape(cfg.N, NU)
    Y, Uref = stage_references(ref, d_W, model, cfg)
    x = np.asarray(x0, dtype=float)
    cost = 0.0
    Q, QN, R = np.array(cfg.Q), np.array(cfg.QN), np.array(cfg.R)
    for k in range(cfg.N):
        e = x - Y[k]
        du = U[k] - Uref[k]
        cost += e @ (Q * e) + du @ (R * du)
        x, _, _ = rk4_stage(x[None], U[k][None], d_W, model, cfg.dt_mpc, cfg.psi)
        x = x[0]
    e = x - Y[cfg.N]
    cost += e @ (QN * e)
    return 0.5 * float(cost)


def rollout(x0, U, d_W, model: NmpcModel, cfg: NmpcConfig) -> np.ndarray:
    X = np.zeros((cfg.N + 1, NX))
    X[0] = x0
    for k in range(cfg.N):
        X[k + 1] = rk4_stage(X[k][None], U[k][None], d_W, model, cfg.dt_mpc, cfg.psi)[0][0]
    return X


def shift_guess(guess: NmpcGuess, fraction: float) -> NmpcGuess:
    """Advance the stored trajectory by ``fraction`` of a stage (linear interpolation)."""
    def interp(A, s):
        n = A.shape[0]
        pos = np.minimum(np.arange(n) + s, n - 1)
        lo = np.floor(pos).astype(int)
        hi = np.minimum(lo + 1, n - 1)
        w = (pos - lo)[:, None]
        return (1.0 - w) * A[lo] + w * A[hi]
    return NmpcGuess(interp(guess.X, fraction), interp(guess.U, fraction),
                     dict(guess.active_set), guess.last_cmd)


def hover_command(model: NmpcModel, psi: float = 0.0) -> AttitudeThrustCommand:
    return AttitudeThrustCommand(model.m_nominal * model.g, 0.0, 0.0, psi)


def _clip_command(u, cfg: NmpcConfig) -> AttitudeThrustCommand:
    u = np.clip(u, cfg.u_lower, cfg.u_upper)
    return AttitudeThrustCommand(float(u[0]), float(u[1]), float(u[2]), cfg.psi)


def solve_step(x0, ref: HorizonReference, d_W, model: NmpcModel, cfg: NmpcConfig,
               warm: NmpcGuess | None = None):
    """Run ``cfg.sqp_iters`` full-step SQP iterations.

    Returns the first-stage command, the updated (unshifted) guess and a
    ``StepInfo``. A QP that fails to reach optimality, or a non-finite
    linearization, keeps the previous command.
    """
    t0 = time.perf_counter()
    guess = warm
    status = qp.OPTIMAL
    fallback = False
    qp_iters = 0
    it = 0
    last_cmd = warm.last_cmd if warm is not None and warm.last_cmd is not None else hover_command(model, cfg.psi)
    for it in range(1, cfg.sqp_iters + 1):
        try:
            tr = transcribe(x0, ref, d_W, model, cfg, guess)
        except FloatingPointError:
            status, fallback = "fault", True
            break
        sol = qp.solve(tr.qp, warm_start=tr.guess.active_set, max_iter=cfg.qp_max_iter)
        qp_iters += sol.iterations
        status = sol.status
        if sol.status != qp.OPTIMAL:
            fallback = True
            break
        dU = sol.x_star
        U = tr.guess.U + dU.reshape(cfg.N, NU)
        X = tr.guess.X + tr.E + (tr.Su @ dU).reshape(cfg.N + 1, NX)
        guess = NmpcGuess(X, U, sol.active_set)
    if fallback:
        cmd = last_cmd
        if guess is None:
            guess = initial_guess(x0, ref, d_W, model, cfg)
    else:
        cmd = _clip_command(guess.U[0], cfg)
    guess.last_cmd = cmd
    info = StepInfo(it, status, fallback, (time.perf_counter() - t0) * 1e6, qp_iters)
    return cmd, guess, info


class NmpcController:
    """Real-time-iteration NMPC holding its warm start between ticks."""

    def __init__(self, model: NmpcModel, cfg: NmpcConfig | None = None, dt_ctrl: float = 0.01):
        self.model = model
        self.cfg = cfg or NmpcConfig()
        self.dt_ctrl = dt_ctrl
        self.warm: NmpcGuess | None = None

    def reset(self) -> None:
        self.warm = None

    def step(self, x0, ref: HorizonReference, d_W):
        warm = None if self.warm is None else shift_guess(self.warm, self.dt_ctrl / self.cfg.dt_mpc)
        cmd, self.warm, info = solve_step(x0, ref, d_W, self.model, self.cfg, warm)
        return cmd, info


class SysIdError(ValueError):
    pass


def _first_order_response(cmd, y0: float, dt: float, tau: float) -> np.ndarray:
    a = math.exp(-dt / tau)
    y = np.empty(len(cmd))
    y[0] = y0
    for k in range(len(cmd) - 1):
        y[k + 1] = a * y[k] + (1.0 - a) * cmd[k]
    return y


def fit_first_order(cmd, resp, dt: float, min_variance: float = 1e-8):
    """Fit ``resp`` as a zero-order-hold first-order lag of ``cmd``.

    Returns (tau, rms output residual).
    """
    cmd = np.asarray(cmd, dtype=float)
    resp = np.asarray(resp, dtype=float)
    if cmd.size < 10 or np.var(cmd) < min_variance:
        raise SysIdError("insufficient excitation in the command signal")
    # equation-error estimate as the starting point
    e = cmd[:-1] - resp[:-1]
    dy = np.diff(resp)
    alpha = float(e @ dy / (e @ e))
    alpha = min(max(alpha, 1e-6), 1.0 - 1e-9)
    tau0 = -dt / math.log(1.0 - alpha)

    def residual(p):
        return _first_order_response(cmd, resp[0], dt, math.exp(p[0])) - resp

    sol = least_squares(residual, [math.log(tau0)], xtol=1e-15, ftol=1e-15, gtol=1e-15)
    tau = math.exp(sol.x[0])
    return tau, float(np.sqrt(np.mean(sol.fun ** 2)))


def identify_time_constants(t, phi_cmd, phi, theta_cmd, theta):
    """Fit roll and pitch time constants from a fixed-rate step-response log.

    Returns ``(tau_phi, tau_theta, (residual_phi, residual_theta))``.
    """
    t = np.asarray(t, dtype=float)
    dt = float(np.median(np.diff(t)))
    if not np.allclose(np.diff(t), dt, rtol=1e-6, atol=1e-9):
        raise SysIdError("log must be sampled at a fixed rate")
    tau_phi, res_phi = fit_first_order(phi_cmd, phi, dt)
    tau_theta, res_theta = fit_first_order(theta_cmd, theta, dt)
    return tau_phi, tau_theta, (res_phi, res_theta)
