import numpy as np
import pytest

from savgrasp.dynamics import VehicleParams, VehicleState


@pytest.fixture
def params():
    return VehicleParams()


def hover_state(z=-1.0):
    return VehicleState(np.array([0.0, 0.0, z]), np.zeros(3), np.zeros(3), np.zeros(3))


# (criterion, passed, detail) rows recorded by test_acceptance.py
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n, ok, detail in sorted(ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
