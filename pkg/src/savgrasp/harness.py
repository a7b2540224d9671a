"""Closed-loop simulation runner, metrics and controller comparison.

Timing: the plant integrates at ``dt / plant_substeps`` (1 kHz by default);
sensing, the observer, the mission logic and the position controller run at
``dt`` (100 Hz). Per tick:

1. sample sensors at the current instant,
2. update the observer with the thrust and attitude of the previous tick,
3. advance the mission and apply attach/detach events to the world,
4. compute the position command,
5. run the attitude loop and plant for ``plant_substeps`` substeps,
6. log one row describing the tick.
"""

from __future__ import annotations

import csv
import functools
import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .dynamics import (GRAVITY, AttachedPayload, SimulationFault, VehicleParams, VehicleState,
                       WrenchInput, World, rotation_matrix, sense)
from .fsm import ARMED, Mode, fsm_step, new_mission
from .inner_loop import AttitudeGains, attitude_control
from .nmpc import (AttitudeThrustCommand, HorizonReference, NmpcController, NmpcModel,
                   identify_time_constants)
from .observer import DisturbanceObserver, ObserverInput
from .pid import PidController
from .scenario import Scenario, horizon

log = logging.getLogger(__name__)

AXES = ("x", "y", "z")
COLUMNS = (
    ["t"]
    + [f"{p}_{a}" for p in ("p", "v") for a in AXES]
    + ["phi", "theta", "psi", "p_rate", "q_rate", "r_rate"]
    + [f"ref_{a}" for a in AXES]
    + ["T_cmd", "phi_cmd", "theta_cmd", "tau_x", "tau_y", "tau_z",
       "sat_T", "sat_tx", "sat_ty", "sat_tz"]
    + [f"dW_true_{a}" for a in AXES]
    + [f"dB_true_{a}" for a in AXES]
    + [f"dB_hat_{a}" for a in AXES]
    + [f"dW_hat_{a}" for a in AXES]
    + ["innov_p", "innov_v", "innov_a", "P_trace", "m_total",
       "sqp_iters", "qp_status", "mode", "gate", "gripper", "xtrack",
       "slosh_x", "slosh_y"]
)
TIMING_COLUMNS = ["t", "solve_time_us"]


@dataclass
class RunMetrics:
    rmse: tuple
    max_abs_error: tuple
    steady_altitude_offset: float
    settling_time: float | None
    solve_time_mean_us: float
    solve_time_max_us: float
    disturbance_error: float | None
    window_samples: int
    grasp_time: float | None = None
    delivery_time: float | None = None
    max_lateral_error: float | None = None
    aborted: bool = False
    completed: bool | None = None

    def as_dict(self, timing: bool = True) -> dict:
        d = asdict(self)
        d["rmse"] = list(self.rmse)
        d["max_abs_error"] = list(self.max_abs_error)
        if not timing:
            d.pop("solve_time_mean_us")
            d.pop("solve_time_max_us")
        return d


@dataclass
class RunResult:
    scenario: str
    controller: str
    table: dict
    metrics: RunMetrics | None
    fault: str | None = None
    mission_trace: list = field(default_factory=list)
    wall_time: float = 0.0


class MetricsError(ValueError):
    pass


# --- inner-loop identification --------------------------------------------------

def step_test_log(params: VehicleParams, gains: AttitudeGains, dt: float = 0.01,
                  substeps: int = 10, amplitude: float = 0.1, hold: float = 1.0):
    """Simulate attitude step commands around hover and return a 100 Hz log.

    Roll is exercised first, then pitch, each with a +a, -a, 0 sequence.
    """
    world = World(params, ground_contact=False)
    world.ground.enabled = False
    state = VehicleState(np.array([0.0, 0.0, -50.0]), np.zeros(3), np.zeros(3), np.zeros(3))
    pattern = [amplitude, -amplitude, 0.0]
    seq = [(a, 0.0) for a in pattern] + [(0.0, a) for a in pattern]
    n_hold = int(round(hold / dt))
    rows = []
    k = 0
    for phi_c, theta_c in seq:
        for _ in range(n_hold):
            rows.append((k * dt, phi_c, state.Theta[0], theta_c, state.Theta[1]))
            cmd = AttitudeThrustCommand(params.m * params.g / (math.cos(phi_c) * math.cos(theta_c)), phi_c, theta_c, 0.0)
            for _ in range(substeps):
                wrench, _ = attitude_control(cmd, state, gains, params)
                state = world.step(state, wrench, dt / substeps)
            k += 1
    return np.array(rows)


@functools.lru_cache(maxsize=16)
def _identify_cached(I: tuple, m: float, kp: tuple, kd: tuple, yaw_rate: float, dt: float, substeps: int):
    params = VehicleParams(m=m, I=np.array(I))
    gains = AttitudeGains(np.array(kp), np.array(kd), yaw_rate)
    data = step_test_log(params, gains, dt, substeps)
    tau_phi, tau_theta, _ = identify_time_constants(*data.T)
    return tau_phi, tau_theta


def identify_inner_loop(params: VehicleParams, gains: AttitudeGains, dt: float = 0.01, substeps: int = 10):
    """Fitted first-order roll/pitch time constants of the attitude loop."""
    return _identify_cached(tuple(params.I), params.m, tuple(gains.Kp_att), tuple(gains.Kd_att),
                            gains.yaw_rate_limit, dt, substeps)


# --- simulation loop ------------------------------------------------------------

def _cross_track(pos, a, b) -> float:
    """Horizontal distance from ``pos`` to the segment a-b."""
    p, a, b = np.asarray(pos[:2]), np.asarray(a[:2]), np.asarray(b[:2])
    ab = b - a
    L2 = float(ab @ ab)
    s = 0.0 if L2 < 1e-12 else min(max(float((p - a) @ ab) / L2, 0.0), 1.0)
    return float(np.linalg.norm(p - (a + s * ab)))


def nmpc_model_for(sc: Scenario) -> NmpcModel:
    if sc.tau_phi is None or sc.tau_theta is None:
        tp, tt = identify_inner_loop(sc.vehicle, sc.attitude, sc.dt, sc.plant_substeps)
    else:
        tp, tt = sc.tau_phi, sc.tau_theta
    return NmpcModel(tau_phi=sc.tau_phi or tp, tau_theta=sc.tau_theta or tt,
                     m_nominal=sc.nominal_mass, g=sc.vehicle.g)


def run(sc: Scenario):
    """Simulate one scenario. Returns a ``RunResult`` (table, metrics, fault)."""
    wall0 = time.perf_counter()
    params = sc.vehicle
    dt = sc.dt
    h = dt / sc.plant_substeps
    rng = np.random.default_rng(sc.seed)
    world = World(params, sc.ground, sc.battery_decay, sc.wind)
    m_nom = sc.nominal_mass

    mission = sc.mission
    p0 = sc.initial_position.copy()
    if mission is not None:
        p0[2] = 0.0
    hover_T = m_nom * params.g if p0[2] < 0 else 0.0
    state = VehicleState(p0, np.zeros(3), np.zeros(3), np.zeros(3))
    ms = new_mission(mission, 0.0) if mission is not None else None

    observer = DisturbanceObserver(sc.observer)
    use_nmpc = sc.controller in ("dompc", "nmpc")
    if use_nmpc:
        ctrl = NmpcController(nmpc_model_for(sc), sc.nmpc, dt)
        n_nodes = sc.nmpc.N + 1
    else:
        ctrl = PidController(sc.pid, m_nom, params.g)

    n_ticks = int(round(sc.duration / dt))
    cols = {c: [] for c in COLUMNS}
    solve_times = []
    mission_trace = []
    events = list(sc.events)
    gate_forced = None
    fault = None
    prev_cmd = AttitudeThrustCommand(hover_T, 0.0, 0.0, 0.0)
    prev_Theta = state.Theta.copy()
    seg_start = seg_end = None
    vel_ff = acc_ff = None
    wrench = WrenchInput(hover_T, np.zeros(3))

    for k in range(n_ticks + 1):
        t = k * dt
        try:
            while events and events[0].t <= t + 1e-9:
                ev = events.pop(0)
                if ev.type == "attach":
                    world.attach_payload(ev.payload)
                elif ev.type == "detach":
                    world.detach_payload()
                elif ev.type == "battery":
                    world.battery_decay = ev.value
                elif ev.type == "wind":
                    world.wind = np.asarray(ev.value, dtype=float)
                elif ev.type == "gate":
                    gate_forced = ev.value
                elif ev.type == "actuators":
                    world.thrust_enabled = ev.value

            vdot = world.acceleration(state, wrench)
            frame = sense(state, vdot, params, sc.noise, rng, t)
            obs = observer.step(frame, ObserverInput(prev_cmd.T_cmd, m_nom, prev_Theta, params.g))

            # mission / reference
            if ms is not None:
                out = fsm_step(ms, mission, frame.P_meas, t)
                if out.event == "attach":
                    world.attach_payload(sc.mission_object or AttachedPayload(0.0))
                elif out.event == "detach":
                    world.detach_payload()
                mode = ms.mode
                armed = mode in ARMED
                gate = out.gate
                setpoint = out.setpoint
                if seg_end is None or np.any(setpoint[:3] != seg_end):
                    seg_start = frame.P_meas.copy() if seg_end is None else seg_end
                    seg_end = setpoint[:3].copy()
                ref_now = setpoint[:3]
                ref_h = HorizonReference.hold(ref_now, n_nodes) if use_nmpc else None
                mission_trace.append((t, mode.value, gate, out.gripper, out.event or ""))
            else:
                mode = None
                armed = True
                gate = t >= sc.gate_off_until
                if use_nmpc:
                    ref_h = horizon(sc.reference, t, n_nodes, sc.nmpc.dt_mpc)
                    ref_now = ref_h.pos[0]
                else:
                    rp, rv, ra = sc.reference.sample(t)
                    ref_now, vel_ff, acc_ff = rp[0], rv[0], ra[0]
                setpoint = np.append(ref_now, 0.0)
            if gate_forced is not None:
                gate = gate_forced

            R = rotation_matrix(state.Theta)
            d_hat_W = R @ obs.d_B
            # controller
            info = None
            if not armed:
                cmd = AttitudeThrustCommand(0.0, 0.0, 0.0, 0.0)
                ctrl.reset()
            elif use_nmpc:
                d_ff = d_hat_W if (sc.controller == "dompc" and gate) else np.zeros(3)
                x0 = np.concatenate([frame.P_meas, frame.V_meas, state.Theta[:2]])
                cmd, info = ctrl.step(x0, ref_h, d_ff)
                solve_times.append(info.solve_time_us)
            else:
                cmd = ctrl.step(frame.P_meas, frame.V_meas, setpoint, dt, vel_ff, acc_ff)

            # truth for logging
            x_vec = state.as_vector()
            T_eff = wrench.T if world.thrust_enabled else 0.0
            dW_true = world.disturbance(x_vec, T_eff, world.t)
            m_tot = world.m_total
            dB_true = R.T @ dW_true + np.array([0.0, 0.0, T_eff * (1.0 / m_nom - 1.0 / m_tot)])
            xs = world.slosh.copy()

            prev_Theta = state.Theta.copy()
            prev_cmd = cmd
            sat_any = np.zeros(4, dtype=bool)
            tau_first = None
            for j in range(sc.plant_substeps):
                wrench, sat = attitude_control(cmd, state, sc.attitude, params)
                if tau_first is None:
                    tau_first = wrench.tau.copy()
                sat_any |= sat
                state = world.step(state, wrench, h)
        except SimulationFault as exc:
            fault = f"t={t:.3f}: {exc}"
            log.error("simulation fault %s", fault)
            break

        if seg_start is not None:
            xtrack = _cross_track(x_vec[:3], seg_start, seg_end)
        else:
            xtrack = 0.0
        row = (
            [t] + list(x_vec[0:6]) + list(x_vec[6:12]) + list(ref_now)
            + [cmd.T_cmd, cmd.phi_cmd, cmd.theta_cmd] + list(tau_first) + [int(s) for s in sat_any]
            + list(dW_true) + list(dB_true) + list(obs.d_B) + list(d_hat_W)
            + list(observer.innovation_norms()) + [float(np.trace(obs.Pcov)), m_tot,
               info.sqp_iters if info else 0, info.qp_status if info else "",
               mode.value if mode is not None else "", int(gate), out.gripper if ms is not None else "",
               xtrack, xs[0], xs[1]]
        )
        for c, v in zip(COLUMNS, row):
            cols[c].append(v)

    table = {c: (np.array(v) if c not in ("qp_status", "mode", "gripper") else v) for c, v in cols.items()}
    table["solve_time_us"] = np.array(solve_times) if solve_times else np.zeros(0)
    if fault is not None:
        table["fault"] = fault
    metrics = None
    if len(table["t"]) > 0:
        try:
            metrics = compute_metrics(table, sc)
        except MetricsError as exc:
            log.warning("metrics unavailable: %s", exc)
    return RunResult(sc.name, sc.controller, table, metrics, fault, mission_trace,
                     time.perf_counter() - wall0)


# --- metrics ------------------------------------------------------------------

def settling_time(t, err, t_event: float, band: float = 0.05, hold: float = 2.0):
    """First time after ``t_event`` from which |err| stays below ``band`` for ``hold`` s.

    The crossing is located by linear interpolation between samples.
    Returns the delay relative to ``t_event``, or None if never settled.
    """
    t = np.asarray(t, dtype=float)
    e = np.abs(np.asarray(err, dtype=float))
    idx = np.nonzero(t >= t_event - 1e-12)[0]
    if idx.size == 0:
        return None
    t, e = t[idx], e[idx]
    inside = e < band
    n = len(t)
    # walk backwards: run_end[i] = time until which the band holds from sample i
    run_end = np.full(n, -np.inf)
    last = t[-1] if inside[-1] else -np.inf
    for i in range(n - 1, -1, -1):
        if not inside[i]:
            last = -np.inf
        elif i == n - 1 or not inside[i + 1]:
            last = t[i]
        run_end[i] = last
    for i in range(n):
        if not inside[i] or (i > 0 and inside[i - 1]):
            continue
        if i > 0:
            # interpolate the crossing between samples i-1 and i
            e0, e1 = e[i - 1], e[i]
            tc = t[i - 1] + (e0 - band) / (e0 - e1) * (t[i] - t[i - 1])
        else:
            tc = t[i]
        if run_end[i] - tc >= hold - 1e-9:
            return float(tc - t_event)
    return None


def lagged_correlation(x, y, dt: float, max_lag: float = 0.5):
    """Peak Pearson correlation of ``y`` lagging ``x`` by 0..``max_lag`` seconds.

    Returns ``(corr, lag_seconds)`` for the lag with the largest |corr|.
    Constant signals give ``(0.0, 0.0)``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    best, best_lag = 0.0, 0.0
    for k in range(int(round(max_lag / dt)) + 1):
        a, b = x[:x.size - k], y[k:]
        if a.size < 3 or np.std(a) == 0 or np.std(b) == 0:
            continue
        c = float(np.corrcoef(a, b)[0, 1])
        if abs(c) > abs(best):
            best, best_lag = c, k * dt
    return best, best_lag


def compute_metrics(table: dict, sc: Scenario | None = None, window=None) -> RunMetrics:
    """Metrics over the gate-ON, post-takeoff window (or a boolean ``window`` mask)."""
    t = np.asarray(table["t"], dtype=float)
    if t.size == 0:
        raise MetricsError("empty run table")
    P = np.stack([np.asarray(table[f"p_{a}"]) for a in AXES], axis=1)
    ref = np.stack([np.asarray(table[f"ref_{a}"]) for a in AXES], axis=1)
    err = P - ref
    mcfg = sc.metrics if sc is not None else None
    start = mcfg.start if mcfg else 0.0
    modes = list(table.get("mode", [""] * t.size))
    gate = np.asarray(table.get("gate", np.ones(t.size)), dtype=bool)
    if window is None:
        window = (t >= start - 1e-12) & gate
        if any(modes):
            window &= np.array([m in (Mode.FLY_TO_GRASP.value, Mode.HOVER_GRASP.value, Mode.INFLATING.value,
                                      Mode.TRANSPORT.value, Mode.HOVER_RELEASE.value, Mode.DEFLATING.value)
                                for m in modes])
    window = np.asarray(window, dtype=bool)
    if not window.any():
        raise MetricsError("metrics window is empty")

    ew = err[window]
    rmse = tuple(float(v) for v in np.sqrt(np.mean(ew ** 2, axis=0)))
    max_abs = tuple(float(v) for v in np.max(np.abs(ew), axis=0))
    steady_start = mcfg.steady_start if (mcfg and mcfg.steady_start is not None) else None
    if steady_start is None:
        tw = t[window]
        steady_start = tw[0] + 0.5 * (tw[-1] - tw[0])
    steady = window & (t >= steady_start - 1e-12)
    if not steady.any():
        steady = window
    z_off = float(np.mean(np.abs(err[steady, 2])))

    d_err = None
    if "dB_hat_x" in table:
        dh = np.stack([np.asarray(table[f"dB_hat_{a}"]) for a in AXES], axis=1)
        dt_ = np.stack([np.asarray(table[f"dB_true_{a}"]) for a in AXES], axis=1)
        d_err = float(np.mean(np.linalg.norm(dh[steady] - dt_[steady], axis=1)))

    st = table.get("solve_time_us", np.zeros(0))
    st = np.asarray(st, dtype=float)
    mean_us = float(st.mean()) if st.size else 0.0
    max_us = float(st.max()) if st.size else 0.0

    # grasp: first increase of the total mass
    m = np.asarray(table.get("m_total", np.zeros(t.size)), dtype=float)
    jumps = np.nonzero(np.diff(m) > 1e-9)[0]
    grasp_time = float(t[jumps[0] + 1]) if jumps.size else None
    settle = None
    if grasp_time is not None:
        band = mcfg.settle_band if mcfg else 0.05
        hold = mcfg.settle_hold if mcfg else 2.0
        mask = window | (t < grasp_time)
        settle = settling_time(t[mask], err[mask, 2], grasp_time, band, hold)

    delivery = None
    aborted = False
    completed = None
    max_lat = None
    if any(modes):
        ms = np.array(modes)
        hr = np.nonzero(ms == Mode.HOVER_RELEASE.value)[0]
        delivery = float(t[hr[0]]) if hr.size else None
        if "xtrack" in table and grasp_time is not None:
            carry = (t >= grasp_time) & np.isin(ms, [Mode.TRANSPORT.value, Mode.HOVER_RELEASE.value])
            if carry.any():
                max_lat = float(np.max(np.asarray(table["xtrack"])[carry]))
        completed = bool(np.any(ms == Mode.DONE.value)) and delivery is not None
        if sc is not None and sc.mission is not None:
            aborted = bool(delivery is None and np.any(ms == Mode.LAND.value))
    return RunMetrics(rmse, max_abs, z_off, settle, mean_us, max_us, d_err, int(window.sum()),
                      grasp_time, delivery, max_lat, aborted, completed)


# --- output -------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".9g")


def table_to_csv(table: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    n = len(table["t"])
    for i in range(n):
        w.writerow([_fmt(table[c][i]) for c in COLUMNS])
    if "fault" in table:
        w.writerow(["# fault", table["fault"]])
    return buf.getvalue()


def read_csv(path) -> dict:
    """Load a run CSV back into column arrays (string columns stay lists)."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    header, body = rows[0], rows[1:]
    out = {}
    for j, name in enumerate(header):
        vals = [r[j] for r in body]
        if name in ("qp_status", "mode", "gripper"):
            out[name] = vals
        else:
            out[name] = np.array([float(v) for v in vals])
    return out


def write_outputs(result: RunResult, out_dir, timing: bool = False) -> dict:
    """Write run CSV, metrics JSON and (optionally) solver timing; return the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"{result.scenario}_{result.controller}"
    paths = {"csv": out / f"{stem}.csv", "metrics": out / f"{stem}_metrics.json"}
    paths["csv"].write_text(table_to_csv(result.table))
    summary = {
        "scenario": result.scenario,
        "controller": result.controller,
        "fault": result.fault,
        "metrics": result.metrics.as_dict(timing) if result.metrics else None,
    }
    paths["metrics"].write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    if result.mission_trace:
        paths["mission"] = out / f"{stem}_mission.csv"
        with paths["mission"].open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "mode", "gate", "gripper", "event"])
            for t, mode, gate, grip, ev in result.mission_trace:
                w.writerow([_fmt(t), mode, int(gate), grip, ev])
    if timing:
        paths["timing"] = out / f"{stem}_timing.csv"
        st = result.table.get("solve_time_us", [])
        paths["timing"].write_text("solve_time_us\n" + "".join(f"{v:.1f}\n" for v in st))
    return paths


# --- comparison ---------------------------------------------------------------

def _run_one(sc: Scenario) -> RunResult:
    return run(sc)


def compare(sc: Scenario, controllers, workers: int = 1):
    """Run ``sc`` once per controller with the same seed."""
    controllers = list(controllers)
    if not controllers:
        raise ValueError("need at least one controller")
    scenarios = [sc.with_controller(c) for c in controllers]
    if workers > 1 and len(scenarios) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_run_one, scenarios))
    return [run(s) for s in scenarios]


SUMMARY_FIELDS = ["rmse_x", "rmse_y", "rmse_z", "max_x", "max_y", "max_z", "z_offset", "settling",
                  "d_err", "delivery", "solve_mean_us", "fault"]


def _summary_row(r: RunResult) -> dict:
    m = r.metrics
    if m is None:
        return {"controller": r.controller, "fault": r.fault or "no metrics"}
    return {
        "controller": r.controller,
        "rmse_x": m.rmse[0], "rmse_y": m.rmse[1], "rmse_z": m.rmse[2],
        "max_x": m.max_abs_error[0], "max_y": m.max_abs_error[1], "max_z": m.max_abs_error[2],
        "z_offset": m.steady_altitude_offset, "settling": m.settling_time,
        "d_err": m.disturbance_error, "delivery": m.delivery_time,
        "solve_mean_us": m.solve_time_mean_us, "fault": r.fault or "",
    }


def comparison_text(results) -> str:
    rows = [_summary_row(r) for r in results]
    header = ["controller"] + SUMMARY_FIELDS
    cells = [[str(h) for h in header]]
    for row in rows:
        line = []
        for h in header:
            v = row.get(h)
            if v is None:
                line.append("-")
            elif isinstance(v, float):
                line.append(f"{v:.4f}")
            else:
                line.append(str(v))
        cells.append(line)
    widths = [max(len(r[j]) for r in cells) for j in range(len(header))]
    return "\n".join("  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in cells) + "\n"


def write_comparison(results, out_dir, timing: bool = False) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for r in results:
        write_outputs(r, out, timing)
    text = comparison_text(results)
    (out / "comparison.txt").write_text(text)
    with (out / "comparison.csv").open("w", newline="") as fh:
        w = csv.DictWriter(fh, ["controller"] + SUMMARY_FIELDS, lineterminator="\n")
        w.writeheader()
        for r in results:
            w.writerow({k: ("" if v is None else _fmt(v)) for k, v in _summary_row(r).items()})
    # per-axis error series, one tidy file per axis
    for j, a in enumerate(AXES):
        with (out / f"error_{a}.csv").open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "controller", f"err_{a}"])
            for r in results:
                tab = r.table
                e = np.asarray(tab[f"p_{a}"]) - np.asarray(tab[f"ref_{a}"])
                for ti, ei in zip(tab["t"], e):
                    w.writerow([_fmt(ti), r.controller, _fmt(ei)])
    return {"text": text}


__all__ = ["COLUMNS", "RunMetrics", "RunResult", "MetricsError", "run", "compute_metrics",
           "settling_time", "compare", "write_outputs", "write_comparison", "comparison_text",
           "table_to_csv", "read_csv", "identify_inner_loop", "step_test_log", "GRAVITY"]
