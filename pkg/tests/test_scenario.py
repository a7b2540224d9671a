import math

import numpy as np
import pytest

from savgrasp import bundle, scenario
from savgrasp.scenario import ScenarioError, loads


def test_bundled_scenarios_load():
    for b in bundle.load_bundle():
        sc = scenario.load(b.path)
        assert sc.duration > 0
        assert sc.reference is not None or sc.mission is not None


def test_heights_become_ned():
    sc = loads("""
schema = 1
[initial]
position = [1.0, 2.0, 3.0]
""")
    assert np.array_equal(sc.initial_position, [1.0, 2.0, -3.0])


@pytest.mark.parametrize("text", [
    "name = 'x'",                                     # no schema
    "schema = 2",                                     # wrong schema
    "schema = 1\nbogus = 1",                          # unknown key
    "schema = 1\ncontroller = 'lqr'",                 # unknown controller
    "schema = 1\nduration = 0.0",                     # non-positive duration
    "schema = 1\n[vehicle]\nmass = 1.0",              # unknown vehicle key
    "schema = 1\n[reference]\ntype = 'spiral'",       # unknown reference
    "schema = 1\n[[events]]\nt = 1.0\ntype = 'boom'",  # unknown event
    "schema = 1\n[reference]\ntype = 'hover'\npoint = [0, 0, 1]\n"
    "[mission]\ngrasp_point = [1, 0, 1]\nrelease_point = [2, 0, 1]",  # both
    "schema = 1\n[vehicle]\nm = -1.0",                # invalid value
    "schema = [",                                     # bad TOML
])
def test_invalid_scenarios(text):
    with pytest.raises(ScenarioError):
        loads(text)


def test_missing_file():
    with pytest.raises(ScenarioError):
        scenario.load("/nonexistent/scenario.toml")


def test_events_sorted_and_typed():
    sc = loads("""
schema = 1
[[events]]
t = 3.0
type = "detach"
[[events]]
t = 1.0
type = "attach"
mass = 0.2
mode = "slosh"
[[events]]
t = 2.0
type = "battery"
decay = 0.01
""")
    assert [e.type for e in sc.events] == ["attach", "battery", "detach"]
    assert sc.events[0].payload.mass == 0.2 and sc.events[0].payload.mode == "slosh"


def test_degree_fields():
    sc = loads("schema = 1\n[nmpc]\nangle_max_deg = 20.0\ntau_phi = 0.2\ntau_theta = 0.25")
    assert math.isclose(sc.nmpc.angle_max, math.radians(20))
    assert sc.tau_phi == 0.2 and sc.tau_theta == 0.25


def test_with_controller_copies():
    sc = loads("schema = 1")
    other = sc.with_controller("pid")
    assert other.controller == "pid" and sc.controller == "dompc"
    with pytest.raises(ScenarioError):
        sc.with_controller("lqr")
