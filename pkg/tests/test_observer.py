import math

import numpy as np
import pytest

from savgrasp.dynamics import GRAVITY, SensorFrame, rk4, rotation_matrix
from savgrasp.observer import (DisturbanceObserver, ObserverConfig, ObserverInput, ObserverState,
                               corrected_measurement, initial_state, make_Q, make_R,
                               measurement_jacobian, measurement_model, predict, process_jacobian,
                               process_model, transition_matrix, update)


def test_process_noise_values():
    Q = np.diag(make_Q(ObserverConfig()))
    assert np.allclose(Q[0:3], 5e-5, rtol=1e-12)
    assert np.allclose(Q[3:6], 5e-5, rtol=1e-12)
    assert math.isclose(Q[8], 0.01 ** 3.5, rel_tol=1e-12)
    # 0.01 ** 3.5 is 1e-7 (10 ** -7); the formula is authoritative
    assert math.isclose(Q[8], 1e-7, rel_tol=1e-12)
    assert math.isclose(Q[6], 0.01 ** 4.2, rel_tol=1e-12)


def test_process_noise_unit_dt():
    Q = np.diag(make_Q(ObserverConfig(dt=1.0, q_p=3.0, q_v=5.0)))
    # 1^x = 1, so the kinematic blocks reduce to 1/q
    assert np.allclose(Q[0:3], 1 / 3.0) and np.allclose(Q[3:6], 1 / 5.0)
    Q = np.diag(make_Q(ObserverConfig(dt=1.0)))
    assert np.allclose(Q[0:6], 0.5)


def test_measurement_noise_values():
    R = np.diag(make_R(ObserverConfig()))
    assert np.allclose(R[0:6], 1e-8, rtol=1e-12)
    assert np.allclose(R[6:9], 5e-5, rtol=1e-12)


def _fd_jacobian(f, x, eps=1e-6):
    J = np.zeros((f(x).size, x.size))
    for i in range(x.size):
        dx = np.zeros_like(x)
        dx[i] = eps
        J[:, i] = (f(x + dx) - f(x - dx)) / (2 * eps)
    return J


def test_jacobians_match_finite_differences():
    rng = np.random.default_rng(42)
    for _ in range(100):
        chi = rng.normal(size=9)
        Theta = rng.uniform(-0.6, 0.6, 3)
        inp = ObserverInput(rng.uniform(5, 15), 1.002, Theta)
        F_fd = _fd_jacobian(lambda c: process_model(c, inp), chi)
        F = process_jacobian(Theta)
        assert np.max(np.abs(F - F_fd)) <= 1e-6 * max(1.0, np.max(np.abs(F)))
        H_fd = _fd_jacobian(measurement_model, chi)
        assert np.max(np.abs(measurement_jacobian(chi) - H_fd)) <= 1e-6


def test_transition_matrix_matches_rk4_map():
    rng = np.random.default_rng(3)
    cfg = ObserverConfig()
    Theta = np.array([0.2, -0.1, 0.5])
    inp = ObserverInput(10.0, 1.002, Theta)
    chi = rng.normal(size=9)

    def step(c):
        st = ObserverState(c, np.eye(9), 0.0)
        return predict(st, inp, cfg).chi

    assert np.allclose(transition_matrix(Theta, cfg.dt), _fd_jacobian(step, chi), atol=1e-9)


def test_covariance_stays_symmetric_psd():
    rng = np.random.default_rng(7)
    cfg = ObserverConfig()
    obs = DisturbanceObserver(cfg)
    for k in range(10000):
        Theta = rng.uniform(-0.4, 0.4, 3)
        inp = ObserverInput(9.8 + rng.normal(), 1.002, Theta)
        frame = SensorFrame(rng.normal(size=3), rng.normal(size=3),
                            np.array([0, 0, -GRAVITY]) + rng.normal(scale=0.3, size=3), k * cfg.dt)
        st = obs.step(frame, inp)
        P = st.Pcov
        assert np.array_equal(P, P.T)
        if k % 500 == 0:
            assert np.linalg.eigvalsh(P)[0] > 0
    assert np.linalg.eigvalsh(obs.state.Pcov)[0] > 0
    assert obs.resets == 0


def test_corrected_measurement_reads_disturbance_at_hover():
    inp = ObserverInput(1.002 * GRAVITY, 1.002, np.zeros(3))
    frame = SensorFrame(np.zeros(3), np.zeros(3), np.array([0.0, 0.0, -GRAVITY + 1.5]), 0.0)
    z = corrected_measurement(frame, inp)
    assert np.allclose(z[6:9], [0.0, 0.0, 1.5])


def test_converges_to_constant_disturbance():
    # synthetic plant that follows the observer's own model exactly
    cfg = ObserverConfig()
    m = 1.002
    d_true = np.array([0.3, -0.2, 1.2])
    Theta = np.array([0.05, -0.03, 0.2])
    T = m * GRAVITY
    inp = ObserverInput(T, m, Theta)
    R = rotation_matrix(Theta)
    chi = np.concatenate([np.zeros(3), np.zeros(3), d_true])
    obs = DisturbanceObserver(cfg)
    for k in range(300):
        t = k * cfg.dt
        a_world = process_model(chi, inp)[3:6]
        f_body = R.T @ (a_world - GRAVITY * np.array([0, 0, 1.0]))
        obs.step(SensorFrame(chi[0:3], chi[3:6], f_body, t), inp)
        chi = rk4(lambda c: process_model(c, inp), chi, cfg.dt)
    assert np.allclose(obs.state.d_B, d_true, atol=1e-3)


def test_gain_scale_zero_freezes_estimate():
    cfg = ObserverConfig(gain_scale=0.0)
    obs = DisturbanceObserver(cfg)
    inp = ObserverInput(9.83, 1.002, np.zeros(3))
    for k in range(50):
        obs.step(SensorFrame(np.zeros(3), np.zeros(3), np.array([0, 0, -GRAVITY + 2.0]), k * 0.01), inp)
    assert np.array_equal(obs.state.d_B, np.zeros(3))


def test_update_rejects_stale_frame():
    cfg = ObserverConfig()
    frame = SensorFrame(np.zeros(3), np.zeros(3), np.array([0, 0, -GRAVITY]), 0.0)
    st = initial_state(frame, cfg)
    inp = ObserverInput(9.83, 1.002, np.zeros(3))
    st = predict(st, inp, cfg)
    with pytest.raises(ValueError):
        update(st, frame, inp, cfg)  # still stamped t = 0


def test_initial_state():
    cfg = ObserverConfig()
    frame = SensorFrame(np.array([1.0, 2, 3]), np.array([0.1, 0, 0]), np.zeros(3), 0.0)
    st = initial_state(frame, cfg)
    assert np.array_equal(st.chi, [1, 2, 3, 0.1, 0, 0, 0, 0, 0])
    assert np.allclose(np.diag(st.Pcov), [1e-2] * 6 + [1.0] * 3)


def test_config_validation():
    with pytest.raises(ValueError):
        ObserverConfig(dt=0.0)
    with pytest.raises(ValueError):
        ObserverConfig(q_d=(4.2, -1.0, 3.5))
