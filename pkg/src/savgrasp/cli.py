"""Command-line entry point: ``savgrasp <command> ...``.

Exit codes: 0 success, 1 simulation fault or failed check, 2 bad configuration.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__, bundle, harness, qp, scenario
from .dynamics import VehicleParams
from .inner_loop import AttitudeGains
from .nmpc import SysIdError, identify_time_constants

EXIT_OK = 0
EXIT_FAULT = 1
EXIT_CONFIG = 2


def _load(args) -> scenario.Scenario:
    sc = scenario.load(args.scenario)
    if getattr(args, "seed", None) is not None:
        sc.seed = args.seed
    if getattr(args, "duration", None) is not None:
        sc.duration = args.duration
    return sc


def cmd_simulate(args) -> int:
    sc = _load(args)
    if args.controller:
        sc = sc.with_controller(args.controller)
    result = harness.run(sc)
    paths = harness.write_outputs(result, args.out, timing=args.timing)
    print(harness.comparison_text([result]), end="")
    print(f"wrote {paths['csv']}")
    if result.fault:
        print(f"fault: {result.fault}", file=sys.stderr)
        return EXIT_FAULT
    return EXIT_OK


def cmd_compare(args) -> int:
    sc = _load(args)
    controllers = [c.strip() for c in args.controllers.split(",") if c.strip()]
    for c in controllers:
        if c not in scenario.CONTROLLERS:
            raise scenario.ScenarioError(f"unknown controller {c!r}")
    results = harness.compare(sc, controllers, workers=args.workers)
    out = harness.write_comparison(results, args.out, timing=args.timing)
    print(out["text"], end="")
    return EXIT_FAULT if any(r.fault for r in results) else EXIT_OK


def cmd_sysid(args) -> int:
    if args.log:
        table = harness.read_csv(args.log)
        missing = [c for c in ("t", "phi_cmd", "phi", "theta_cmd", "theta") if c not in table]
        if missing:
            raise scenario.ScenarioError(f"log lacks columns {missing}")
        data = [table[c] for c in ("t", "phi_cmd", "phi", "theta_cmd", "theta")]
    else:
        data = harness.step_test_log(VehicleParams(), AttitudeGains()).T
    try:
        tau_phi, tau_theta, (r_phi, r_theta) = identify_time_constants(*data)
    except SysIdError as exc:
        print(f"sysid failed: {exc}", file=sys.stderr)
        return EXIT_FAULT
    print(f"tau_phi   = {tau_phi:.4f} s  (rms residual {r_phi:.2e} rad)")
    print(f"tau_theta = {tau_theta:.4f} s  (rms residual {r_theta:.2e} rad)")
    return EXIT_OK


def cmd_qp_selftest(args) -> int:
    fails, dx, kkt = qp.selftest(args.count, seed=args.seed)
    status = "PASS" if fails == 0 else "FAIL"
    print(f"{status}: {args.count - fails}/{args.count} random QPs match enumeration "
          f"(max |dx| {dx:.2e}, max KKT residual {kkt:.2e})")
    return EXIT_OK if fails == 0 else EXIT_FAULT


def cmd_verify_bundle(args) -> int:
    results = bundle.verify_bundle(bless_values=args.bless, names=args.only or None)
    failed = [r for r in results if not r.ok]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_OK if not failed else EXIT_FAULT


def cmd_version(args) -> int:
    print(f"savgrasp {__version__}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="savgrasp", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true", help="log warnings and progress")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one scenario")
    p.add_argument("--scenario", required=True, type=Path)
    p.add_argument("--controller", choices=scenario.CONTROLLERS)
    p.add_argument("--out", type=Path, default=Path("out"))
    p.add_argument("--seed", type=int)
    p.add_argument("--duration", type=float)
    p.add_argument("--timing", action="store_true", help="also write per-tick solver times")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="run one scenario under several controllers")
    p.add_argument("--scenario", required=True, type=Path)
    p.add_argument("--controllers", default="dompc,nmpc,pid")
    p.add_argument("--out", type=Path, default=Path("out"))
    p.add_argument("--seed", type=int)
    p.add_argument("--duration", type=float)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--timing", action="store_true")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("sysid", help="fit attitude-loop time constants")
    p.add_argument("--log", type=Path, help="run CSV; default simulates a step test")
    p.set_defaults(func=cmd_sysid)

    p = sub.add_parser("qp-selftest", help="check the QP solver against enumeration")
    p.add_argument("--count", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_qp_selftest)

    p = sub.add_parser("verify-bundle", help="run bundled scenarios and check expected metrics")
    p.add_argument("--bless", action="store_true", help="rewrite expected values from this run")
    p.add_argument("--only", nargs="*", help="scenario names to run")
    p.set_defaults(func=cmd_verify_bundle)

    p = sub.add_parser("version", help="print the package version")
    p.set_defaults(func=cmd_version)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (scenario.ScenarioError, FileNotFoundError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
