"""Command-line harness.

Subcommands:
  run    simulate one scenario and write its 500 Hz trace as CSV
  list   list the built-in scenarios
  size   sweep the speed-ratio design space and report the mass crossover
  check  run every scenario's built-in assertions; exit 0 only if all pass

The configuration file can be given with --config or the DSDM_CONFIG
environment variable; otherwise the packaged prototype values are used.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .config_io import FullConfig, load_config
from .dynamics import SimulationFault
from .params import ConfigError
from .scenarios import catalog, run_checks, run_scenario, write_trace
from .sizing import MassModel, crossover_ratio, mass_sweep

CONFIG_ENV_VAR = "DSDM_CONFIG"


def _resolve_config(path_arg: Optional[str]) -> FullConfig:
    path = path_arg if path_arg is not None else os.environ.get(CONFIG_ENV_VAR)
    return load_config(path)


def _parse_lambda_range(text: str) -> tuple[float, float]:
    try:
        lo_s, hi_s = text.split(":")
        lo, hi = float(lo_s), float(hi_s)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected LOW:HIGH (e.g. 1:10), got {text!r}") from None
    if not (1.0 <= lo < hi):
        raise argparse.ArgumentTypeError(
            f"need 1 <= LOW < HIGH, got {lo}:{hi}")
    return lo, hi


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="dsdm",
        description="Dual-speed dual-motor actuator simulation harness")
    sub = p.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="simulate one scenario, write CSV trace")
    run_p.add_argument("scenario", help="scenario name (see 'dsdm list')")
    run_p.add_argument("--config", help="YAML configuration file")
    run_p.add_argument("--out", help="trace output path "
                                     "(default <scenario>.csv)")

    sub.add_parser("list", help="list built-in scenarios")

    size_p = sub.add_parser("size", help="design-space mass comparison")
    size_p.add_argument("--power", type=float, default=100.0,
                        help="output power at both operating points, W")
    size_p.add_argument("--speed", type=float, default=10.0,
                        help="fast operating speed, rad/s")
    size_p.add_argument("--lambda-range", type=_parse_lambda_range,
                        default=(1.0, 10.0), metavar="LOW:HIGH",
                        help="speed-ratio sweep range (default 1:10)")
    size_p.add_argument("--samples", type=int, default=19,
                        help="number of sweep points")
    size_p.add_argument("--out", help="write the sweep as CSV here")

    check_p = sub.add_parser("check", help="run all scenario assertions")
    check_p.add_argument("--config", help="YAML configuration file")

    return p


def _cmd_run(args: argparse.Namespace) -> int:
    scenarios = catalog()
    if args.scenario not in scenarios:
        print(f"error: unknown scenario {args.scenario!r}; "
              f"known: {', '.join(sorted(scenarios))}", file=sys.stderr)
        return 2
    config = _resolve_config(args.config)
    scenario = scenarios[args.scenario]
    result = run_scenario(scenario, config)
    out = Path(args.out) if args.out else Path(f"{scenario.name}.csv")
    write_trace(result.records, out)
    print(f"{scenario.name}: {len(result.records)} samples -> {out}")
    for t, a, b in result.transitions:
        print(f"  t={t:.4f} s  {a.value} -> {b.value}")
    if result.faults:
        for fault in result.faults:
            print(f"  FAULT: {fault}", file=sys.stderr)
        return 1
    return 0


def _cmd_list(_: argparse.Namespace) -> int:
    for name, s in sorted(catalog().items()):
        print(f"{name:26s} {s.description}")
    return 0


def _cmd_size(args: argparse.Namespace) -> int:
    mm = MassModel()
    lo, hi = args.lambda_range
    lambdas = np.linspace(lo, hi, args.samples)
    rows = mass_sweep(args.power, args.speed, lambdas, mm)
    lines = ["lambda,single_motor_kg,dual_motor_kg"]
    print(f"{'lambda':>8s} {'single [kg]':>12s} {'dual [kg]':>12s}")
    for lam, single, dual in rows:
        print(f"{lam:8.3f} {single:12.4f} {dual:12.4f}")
        lines.append(f"{lam:.6f},{single:.6e},{dual:.6e}")
    try:
        lam_star = crossover_ratio(args.power, args.speed, mm, lo=lo, hi=hi)
        print(f"mass crossover at speed ratio {lam_star:.3f}")
    except ConfigError:
        print("no mass crossover inside the sweep range")
    if args.out:
        Path(args.out).write_text("\n".join(lines) + "\n")
    return 0


def _cmd_check(args: argparse.Namespace) -> int:
    config = _resolve_config(args.config)
    all_ok = True
    for name, scenario in sorted(catalog().items()):
        try:
            _, checks = run_checks(scenario, config)
        except SimulationFault as exc:
            print(f"{name}: SIMULATION FAULT: {exc}")
            all_ok = False
            continue
        for c in checks:
            status = "PASS" if c.passed else "FAIL"
            print(f"{name}: {status} {c.name} ({c.detail})")
            all_ok = all_ok and c.passed
    return 0 if all_ok else 1


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        handler = {"run": _cmd_run, "list": _cmd_list,
                   "size": _cmd_size, "check": _cmd_check}[args.command]
        return handler(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except SimulationFault as exc:
        print(f"simulation fault: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
