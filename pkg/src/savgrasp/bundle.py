"""Bundled scenarios and their expected metrics.

Each bundled scenario is run for its listed controllers and compared
against (a) fixed bounds from ``bundle.toml`` and (b) blessed values with
tolerances in ``expected/<name>.json``. Blessed values change only through
``verify_bundle(bless=True)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import tomli

from . import harness, scenario

# metric -> (abs_tol, rel_tol) used when blessing a metric for the first time
DEFAULT_TOLERANCES = {
    "rmse": (0.01, 0.1),
    "max_abs_error": (0.02, 0.1),
    "steady_altitude_offset": (0.01, 0.1),
    "settling_time": (0.3, 0.1),
    "disturbance_error": (0.01, 0.2),
    "grasp_time": (0.3, 0.05),
    "delivery_time": (0.5, 0.05),
    "max_lateral_error": (0.02, 0.2),
}
EXACT = ("completed", "aborted")


@dataclass
class BundledScenario:
    name: str
    path: Path
    expected_path: Path
    controllers: list
    note: str = ""
    checks: list = field(default_factory=list)


@dataclass
class CheckResult:
    scenario: str
    controller: str
    metric: str
    expected: str
    actual: object
    ok: bool

    def line(self) -> str:
        flag = "ok  " if self.ok else "FAIL"
        return f"{flag} {self.scenario}/{self.controller}: {self.metric} = {self.actual!r} (expected {self.expected})"


def bundle_dir() -> Path:
    return Path(str(resources.files("savgrasp") / "scenarios"))


def load_bundle(root: Path | None = None) -> list:
    root = bundle_dir() if root is None else Path(root)
    with (root / "bundle.toml").open("rb") as fh:
        manifest = tomli.load(fh)
    out = []
    for entry in manifest.get("scenario", []):
        path = root / entry["file"]
        if not path.exists():
            raise scenario.ScenarioError(f"bundled scenario missing: {path}")
        name = path.stem
        out.append(BundledScenario(name, path, root / "expected" / f"{name}.json",
                                   list(entry["controllers"]), entry.get("note", ""),
                                   list(entry.get("checks", []))))
    return out


def _flatten(metrics: dict) -> dict:
    flat = {}
    for k, v in metrics.items():
        if k.startswith("solve_time") or k == "window_samples":
            continue
        if isinstance(v, list):
            for a, x in zip(harness.AXES, v):
                flat[f"{k}_{a}"] = x
        else:
            flat[k] = v
    return flat


def _base(metric: str) -> str:
    for k in DEFAULT_TOLERANCES:
        if metric == k or metric.startswith(k + "_"):
            return k
    return metric


def _compare(expected: dict, actual) -> tuple:
    value = expected.get("value")
    if value is None or actual is None or isinstance(value, bool):
        return actual == value, repr(value)
    tol = expected.get("abs_tol", 0.0) + expected.get("rel_tol", 0.0) * abs(value)
    ok = actual is not None and math.isfinite(actual) and abs(actual - value) <= tol
    return ok, f"{value:.6g} +/- {tol:.3g}"


def _check_bound(chk: dict, actual) -> tuple:
    if "equals" in chk:
        return actual == chk["equals"], f"== {chk['equals']!r}"
    ok = actual is not None
    desc = []
    if "min" in chk:
        ok = ok and actual >= chk["min"]
        desc.append(f">= {chk['min']}")
    if "max" in chk:
        ok = ok and actual <= chk["max"]
        desc.append(f"<= {chk['max']}")
    return ok, " and ".join(desc)


def run_bundled(b: BundledScenario) -> dict:
    """Run every listed controller; return controller -> flat metrics (or fault)."""
    sc = scenario.load(b.path)
    results = harness.compare(sc, b.controllers)
    out = {}
    for r in results:
        flat = _flatten(r.metrics.as_dict(timing=False)) if r.metrics else {}
        flat["fault"] = r.fault
        out[r.controller] = flat
    return out


def bless(b: BundledScenario, metrics: dict) -> dict:
    old = {}
    if b.expected_path.exists():
        old = json.loads(b.expected_path.read_text()).get("runs", {})
    runs = {}
    for ctrl, flat in metrics.items():
        runs[ctrl] = {}
        for k, v in flat.items():
            entry = {"value": v}
            if isinstance(v, float) and k not in EXACT:
                prev = old.get(ctrl, {}).get(k, {})
                a, r = DEFAULT_TOLERANCES.get(_base(k), (0.01, 0.1))
                entry["abs_tol"] = prev.get("abs_tol", a)
                entry["rel_tol"] = prev.get("rel_tol", r)
            runs[ctrl][k] = entry
    doc = {"scenario": b.path.name, "note": b.note, "runs": runs}
    b.expected_path.parent.mkdir(parents=True, exist_ok=True)
    b.expected_path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return doc


def verify_bundle(root: Path | None = None, bless_values: bool = False, names=None, log=print) -> list:
    """Run the bundle; return a list of ``CheckResult``. ``bless_values`` rewrites expectations."""
    results = []
    for b in load_bundle(root):
        if names and b.name not in names:
            continue
        metrics = run_bundled(b)
        if bless_values:
            bless(b, metrics)
        if not b.expected_path.exists():
            results.append(CheckResult(b.name, "*", "expected-file", "present", None, False))
        else:
            runs = json.loads(b.expected_path.read_text()).get("runs", {})
            for ctrl in b.controllers:
                got = metrics.get(ctrl, {})
                results.append(CheckResult(b.name, ctrl, "fault", "None", got.get("fault"), got.get("fault") is None))
                for k, exp in sorted(runs.get(ctrl, {}).items()):
                    if k == "fault":
                        continue
                    ok, desc = _compare(exp, got.get(k))
                    results.append(CheckResult(b.name, ctrl, k, desc, got.get(k), ok))
        for chk in b.checks:
            actual = metrics.get(chk["controller"], {}).get(chk["metric"])
            ok, desc = _check_bound(chk, actual)
            results.append(CheckResult(b.name, chk["controller"], chk["metric"], desc, actual, ok))
        if log:
            bad = [r for r in results if r.scenario == b.name and not r.ok]
            log(f"{b.name}: {'PASS' if not bad else 'FAIL'}")
            for r in bad:
                log("  " + r.line())
    return results
