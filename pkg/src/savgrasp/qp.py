"""Dense primal active-set solver for box- and equality-constrained convex QPs.

    minimize    1/2 x' H x + f' x
    subject to  A_eq x = b_eq,  lb <= x <= ub

The working set holds bound indices fixed at their lower or upper value.
Iterates stay feasible, so the objective never increases.
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.optimize import lsq_linear

KKT_TOL = 1e-8
MAX_ITER = 200

OPTIMAL = "optimal"
MAX_ITER_STATUS = "max_iter"
INFEASIBLE = "infeasible"


@dataclass
class QpProblem:
    H: np.ndarray
    f: np.ndarray
    lb: np.ndarray | None = None
    ub: np.ndarray | None = None
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None

    def __post_init__(self):
        self.H = np.atleast_2d(np.asarray(self.H, dtype=float))
        self.f = np.asarray(self.f, dtype=float).ravel()
        n = self.f.size
        if self.H.shape != (n, n):
            raise ValueError("H must be n x n")
        if not np.allclose(self.H, self.H.T, atol=1e-12 * max(1.0, np.abs(self.H).max())):
            raise ValueError("H must be symmetric")
        self.lb = np.full(n, -np.inf) if self.lb is None else np.asarray(self.lb, dtype=float).ravel()
        self.ub = np.full(n, np.inf) if self.ub is None else np.asarray(self.ub, dtype=float).ravel()
        if np.any(self.lb > self.ub):
            raise ValueError("lb must not exceed ub")
        if self.A_eq is None:
            self.A_eq = np.zeros((0, n))
            self.b_eq = np.zeros(0)
        else:
            self.A_eq = np.atleast_2d(np.asarray(self.A_eq, dtype=float))
            self.b_eq = np.asarray(self.b_eq, dtype=float).ravel()
            if self.A_eq.shape[0] and np.linalg.matrix_rank(self.A_eq) < self.A_eq.shape[0]:
                raise ValueError("A_eq must have full row rank")

    @property
    def n(self) -> int:
        return self.f.size

    def objective(self, x) -> float:
        return float(0.5 * x @ self.H @ x + self.f @ x)


@dataclass
class QpSolution:
    x_star: np.ndarray
    lambda_eq: np.ndarray
    mu: np.ndarray
    status: str
    kkt_residual: float
    iterations: int = 0
    active_set: dict = field(default_factory=dict)
    objective_trace: list = field(default_factory=list)

    @property
    def multipliers(self) -> np.ndarray:
        """Equality multipliers followed by bound multipliers (signed, + at upper)."""
        return np.concatenate([self.lambda_eq, self.mu])


def regularize(H: np.ndarray, floor: float = 1e-10) -> np.ndarray:
    """Add the smallest rung of eps * I that lifts the spectrum to ``floor``."""
    H = np.asarray(H, dtype=float)
    n = H.shape[0]
    lam_min = np.linalg.eigvalsh(H)[0] if n else 0.0
    if lam_min >= floor:
        return H.copy()
    eps = floor
    while lam_min + eps < floor:
        eps *= 100.0
    # lam_min + eps is evaluated from the shifted matrix to avoid trusting the arithmetic
    out = H + eps * np.eye(n)
    while np.linalg.eigvalsh(out)[0] < floor:
        eps *= 100.0
        out = H + eps * np.eye(n)
    return out


def kkt_residual(p: QpProblem, x, lam, mu) -> float:
    """Max of stationarity, primal, dual and complementarity violations.

    ``mu`` is signed: positive entries act on the upper bound, negative on the
    lower bound, so stationarity reads H x + f + A' lam + mu = 0.
    """
    stat = p.H @ x + p.f + p.A_eq.T @ lam + mu
    prim_eq = p.A_eq @ x - p.b_eq
    prim_box = np.maximum(np.maximum(p.lb - x, x - p.ub), 0.0)
    mu_up = np.maximum(mu, 0.0)
    mu_lo = np.maximum(-mu, 0.0)
    with np.errstate(invalid="ignore"):
        comp_up = np.where(np.isfinite(p.ub), mu_up * (p.ub - x), mu_up)
        comp_lo = np.where(np.isfinite(p.lb), mu_lo * (x - p.lb), mu_lo)
    parts = [np.abs(stat), np.abs(prim_eq), prim_box, np.abs(comp_up), np.abs(comp_lo)]
    return float(max((np.max(v) if v.size else 0.0) for v in parts))


def _feasible_start(p: QpProblem, x0):
    x = np.clip(x0, p.lb, p.ub)
    if p.A_eq.shape[0] == 0:
        return x
    if np.max(np.abs(p.A_eq @ x - p.b_eq)) <= 1e-10:
        return x
    res = lsq_linear(p.A_eq, p.b_eq, bounds=(p.lb, p.ub), method="bvls", tol=1e-14)
    x = np.clip(res.x, p.lb, p.ub)
    if np.max(np.abs(p.A_eq @ x - p.b_eq)) > 1e-8:
        return None
    return x


def _eqp_step(p: QpProblem, x, free: np.ndarray):
    """Newton step on the free variables and multipliers at the step's end point."""
    n = p.n
    g = p.H @ x + p.f
    idx = np.flatnonzero(free)
    m = p.A_eq.shape[0]
    nf = idx.size
    if m == 0 and nf:
        # box-only problems: reduced Hessian is normally positive definite
        try:
            c = cho_factor(p.H[np.ix_(idx, idx)], check_finite=False)
            step = np.zeros(n)
            step[idx] = cho_solve(c, -g[idx], check_finite=False)
            return step, np.zeros(0)
        except LinAlgError:
            pass
    K = np.zeros((nf + m, nf + m))
    K[:nf, :nf] = p.H[np.ix_(idx, idx)]
    K[:nf, nf:] = p.A_eq[:, idx].T
    K[nf:, :nf] = p.A_eq[:, idx]
    rhs = np.concatenate([-g[idx], np.zeros(m)])
    sol = np.linalg.lstsq(K, rhs, rcond=None)[0] if nf + m else np.zeros(0)
    step = np.zeros(n)
    step[idx] = sol[:nf]
    lam = sol[nf:]
    return step, lam


def _multipliers(p: QpProblem, x, lam, at_lower, at_upper):
    """Least-squares eq multipliers and bound multipliers for the working set."""
    g = p.H @ x + p.f
    free = ~(at_lower | at_upper)
    m = p.A_eq.shape[0]
    if m:
        lam = np.linalg.lstsq(p.A_eq[:, free].T, -g[free], rcond=None)[0] if free.any() else \
            np.linalg.lstsq(p.A_eq.T, -g, rcond=None)[0]
    else:
        lam = np.zeros(0)
    r = g + p.A_eq.T @ lam
    mu = np.zeros(p.n)
    mu[at_upper] = -r[at_upper]
    mu[at_lower] = -r[at_lower]
    return lam, mu


def solve(p: QpProblem, warm_start: dict | None = None, x0=None, max_iter: int = MAX_ITER) -> QpSolution:
    """Solve ``p``; ``warm_start`` maps bound index -> 'lower' | 'upper'.

    Bound multipliers are returned signed (see ``kkt_residual``); the
    magnitude of an active upper bound multiplier is its usual value.
    """
    n = p.n
    start = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float)
    at_lower = np.zeros(n, dtype=bool)
    at_upper = np.zeros(n, dtype=bool)
    fixed = np.isclose(p.lb, p.ub)
    if warm_start:
        for i, side in warm_start.items():
            if side == "lower" and np.isfinite(p.lb[i]):
                at_lower[i] = True
                start[i] = p.lb[i]
            elif side == "upper" and np.isfinite(p.ub[i]):
                at_upper[i] = True
                start[i] = p.ub[i]
    at_lower |= fixed & ~at_upper
    x = _feasible_start(p, start)
    if x is None:
        return QpSolution(np.clip(start, p.lb, p.ub), np.zeros(p.A_eq.shape[0]), np.zeros(n), INFEASIBLE, np.inf)
    # fixing bounds must not conflict with equality feasibility
    if p.A_eq.shape[0]:
        at_lower &= np.isclose(x, p.lb)
        at_upper &= np.isclose(x, p.ub)
    x[at_lower] = p.lb[at_lower]
    x[at_upper] = p.ub[at_upper]
    if p.A_eq.shape[0] and np.linalg.matrix_rank(p.A_eq[:, ~(at_lower | at_upper)]) < p.A_eq.shape[0]:
        at_lower[:] = fixed
        at_upper[:] = False

    trace = [p.objective(x)]
    lam = np.zeros(p.A_eq.shape[0])
    mu = np.zeros(n)
    status = MAX_ITER_STATUS
    it = 0
    for it in range(1, max_iter + 1):
        free = ~(at_lower | at_upper)
        step, lam = _eqp_step(p, x, free)
        scale = max(1.0, np.max(np.abs(x)))
        if np.max(np.abs(step)) <= 1e-12 * scale:
            lam, mu = _multipliers(p, x, lam, at_lower, at_upper)
            # dual feasibility: lower-bound multipliers must be <= 0, upper >= 0
            viol = np.where(at_lower & ~fixed, np.maximum(mu, 0.0), 0.0) + \
                np.where(at_upper & ~fixed, np.maximum(-mu, 0.0), 0.0)
            worst = int(np.argmax(viol)) if n else 0
            if n == 0 or viol[worst] <= KKT_TOL:
                status = OPTIMAL
                break
            at_lower[worst] = False
            at_upper[worst] = False
            continue
        alpha = 1.0
        block = -1
        block_upper = False
        for i in np.flatnonzero(free & (step != 0.0)):
            if step[i] > 0 and np.isfinite(p.ub[i]):
                a = (p.ub[i] - x[i]) / step[i]
                if a < alpha:
                    alpha, block, block_upper = a, i, True
            elif step[i] < 0 and np.isfinite(p.lb[i]):
                a = (p.lb[i] - x[i]) / step[i]
                if a < alpha:
                    alpha, block, block_upper = a, i, False
        alpha = max(alpha, 0.0)
        x = x + alpha * step
        if block >= 0:
            if block_upper:
                x[block] = p.ub[block]
                at_upper[block] = True
            else:
                x[block] = p.lb[block]
                at_lower[block] = True
        trace.append(p.objective(x))
    if status == OPTIMAL:
        x, lam, mu = _polish(p, x, at_lower, at_upper)
    res = kkt_residual(p, x, lam, mu)
    if status == OPTIMAL and res >= KKT_TOL:
        status = MAX_ITER_STATUS
    active = {int(i): "lower" for i in np.flatnonzero(at_lower & ~fixed)}
    active.update({int(i): "upper" for i in np.flatnonzero(at_upper)})
    return QpSolution(x, lam, mu, status, res, it, active, trace)


def _polish(p: QpProblem, x, at_lower, at_upper):
    """Re-solve the final equality system directly for a clean KKT point."""
    free = ~(at_lower | at_upper)
    x = x.copy()
    x[at_lower] = p.lb[at_lower]
    x[at_upper] = p.ub[at_upper]
    step, _ = _eqp_step(p, x, free)
    x = x + step
    # one round of iterative refinement
    step, _ = _eqp_step(p, x, free)
    x = x + step
    lam, mu = _multipliers(p, x, None, at_lower, at_upper)
    return x, lam, mu


@functools.lru_cache(maxsize=None)
def _bound_choices(nb: int) -> np.ndarray:
    return np.array(list(itertools.product((0, 1), repeat=nb)), dtype=bool).reshape(2 ** nb, nb)


def enumerate_box_qp(p: QpProblem) -> np.ndarray:
    """Reference solution of a box-only convex QP by trying all 3^n active sets.

    Each variable is free, at its lower bound or at its upper bound; the
    best feasible stationary candidate wins. Exponential; meant for n <= 8.
    """
    if p.A_eq.shape[0]:
        raise ValueError("enumeration supports box constraints only")
    n = p.n
    best_x, best_obj = None, np.inf
    # group the 3^n sets by their free subset; bound choices become multiple right-hand sides
    for free_code in itertools.product((True, False), repeat=n):
        free = np.array(free_code)
        bound = ~free
        nb = int(bound.sum())
        choices = _bound_choices(nb)
        Xb = np.where(choices, p.ub[bound], p.lb[bound])
        ok = np.all(np.isfinite(Xb), axis=1)
        if not ok.any():
            continue
        Xb = Xb[ok]
        X = np.zeros((Xb.shape[0], n))
        X[:, bound] = Xb
        if free.any():
            Hff = p.H[np.ix_(free, free)]
            rhs = -(p.f[free][:, None] + p.H[np.ix_(free, bound)] @ Xb.T)
            try:
                X[:, free] = np.linalg.solve(Hff, rhs).T
            except np.linalg.LinAlgError:
                continue
        feas = np.all(X >= p.lb - 1e-12, axis=1) & np.all(X <= p.ub + 1e-12, axis=1)
        if not feas.any():
            continue
        Xf = X[feas]
        objs = 0.5 * np.einsum("ij,jk,ik->i", Xf, p.H, Xf) + Xf @ p.f
        k = int(np.argmin(objs))
        if objs[k] < best_obj - 1e-14:
            best_x, best_obj = Xf[k].copy(), float(objs[k])
    return best_x


def random_box_qp(rng: np.random.Generator, n: int = 6) -> QpProblem:
    """Random strictly convex box-constrained QP with a mix of active bounds."""
    M = rng.standard_normal((n, n))
    H = M @ M.T + 0.1 * np.eye(n)
    f = 3.0 * rng.standard_normal(n)
    lb = -rng.uniform(0.1, 1.0, n)
    ub = rng.uniform(0.1, 1.0, n)
    return QpProblem(H, f, lb, ub)


def selftest(n_problems: int = 200, n: int = 6, seed: int = 0, tol: float = 1e-7) -> tuple:
    """Compare ``solve`` with ``enumerate_box_qp`` on random problems.

    Returns (number of failures, worst solution difference, worst KKT residual).
    """
    rng = np.random.default_rng(seed)
    failures = 0
    worst_dx = worst_kkt = 0.0
    for _ in range(n_problems):
        p = random_box_qp(rng, n)
        sol = solve(p)
        ref = enumerate_box_qp(p)
        dx = float(np.max(np.abs(sol.x_star - ref)))
        worst_dx = max(worst_dx, dx)
        worst_kkt = max(worst_kkt, sol.kkt_residual)
        if sol.status != OPTIMAL or dx > tol or sol.kkt_residual >= KKT_TOL:
            failures += 1
    return failures, worst_dx, worst_kkt
