"""Command line entry point: ``run``, ``design`` and ``check``."""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import acceptance
from . import mrac_tracker as mrac
from . import plant_models as pm
from . import sim_engine as se
from . import stance_regulator as sr
from .scenarios import (ConfigError, RunReport, csv_name, load_config, scenario_config,
                        write_csv)

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _scenario_index(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer 1..4, got {text!r}")
    if not 1 <= value <= 4:
        raise argparse.ArgumentTypeError(f"scenario must be 1..4, got {value}")
    return value


def _positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}")
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sidebalance",
                                     description="One-leg balance simulation with a moving-mass cart.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate one scenario and write a CSV trajectory")
    run.add_argument("--scenario", type=_scenario_index, required=True)
    run.add_argument("--mode", choices=("sequential", "coupled"), default=None)
    run.add_argument("--config", type=Path, default=None, help="TOML overrides")
    run.add_argument("--out", type=Path, default=Path("."), help="output directory")
    run.add_argument("--dt", type=_positive_float, default=None)
    run.add_argument("--duration", type=_positive_float, default=None)

    design = sub.add_parser("design", help="print the design constants of a scenario")
    design.add_argument("--scenario", type=_scenario_index, required=True)

    check = sub.add_parser("check", help="run the acceptance suite")
    check.add_argument("--flip-gamma-r", action="store_true",
                       help="negate gamma_r in every scenario (negative test)")
    check.add_argument("--duration", type=_positive_float, default=None,
                       help="override simulation horizons")
    check.add_argument("--only", type=int, nargs="+", choices=sorted(acceptance.CRITERIA),
                       metavar="N", help="run a subset of criteria")
    return parser


def cmd_run(args, out=None, err=None) -> int:
    out, err = out or sys.stdout, err or sys.stderr
    try:
        cfg = load_config(args.config, args.scenario) if args.config else scenario_config(args.scenario)
        changes = {k: v for k, v in (("mode", args.mode), ("dt", args.dt), ("duration", args.duration))
                   if v is not None}
        cfg = cfg.replace(sim=dataclasses.replace(cfg.sim, **changes))
    except (ConfigError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=err)
        return EXIT_FAIL
    try:
        result = cfg.run()
    except (se.NonFiniteDerivative, sr.SingularFeedthrough, ValueError) as exc:
        print(f"error: {exc}", file=err)
        return EXIT_FAIL
    args.out.mkdir(parents=True, exist_ok=True)
    path = write_csv(result, args.out / csv_name(cfg))
    print(f"wrote {path} ({len(result)} samples)", file=out)
    if result.status != se.COMPLETED:
        print(f"run ended early: {result.status} at t = {result.t[-1]:.3f} s", file=out)
        return EXIT_FAIL
    for line in RunReport.from_result(result).lines():
        print(line, file=out)
    return EXIT_OK


def _fmt(x) -> str:
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        return f"{float(arr):.10g}"
    return np.array2string(arr, precision=10, separator=", ", floatmode="maxprec")


def cmd_design(args, out=None) -> int:
    out = out or sys.stdout
    cfg = scenario_config(args.scenario)
    p = cfg.physical
    lin = sr.linearize(p)
    d = cfg.design
    der = mrac.derive(p.cart_mass, cfg.mrac)
    Kx, Kr = mrac.ideal_gains(p.cart_mass, p.friction_b, cfg.mrac.b_nominal)
    rows = [
        ("scenario", cfg.scenario.name),
        ("delta", _fmt(pm.delta(p))),
        ("a", _fmt(lin.a)),
        ("b_lin", _fmt(lin.b_lin)),
        ("feedthrough L/g", _fmt(lin.feedthrough)),
        ("poles", f"{d.mu1}, {d.mu2}"),
        ("K", _fmt(d.K)),
        ("K_e", _fmt(d.K_e)),
        ("1 - (L/g) k1", _fmt(1 - lin.feedthrough * d.k1)),
        ("equilibrium y", _fmt(pm.equilibrium_cart_position(p))),
        ("A_m", _fmt(der.A_m)),
        ("B_m", _fmt(der.B_m)),
        ("P", _fmt(der.P)),
        ("ideal K_x", _fmt(Kx)),
        ("ideal K_r", _fmt(Kr)),
    ]
    width = max(len(k) for k, _ in rows)
    for key, value in rows:
        value = value.replace("\n", "\n" + " " * (width + 2))
        print(f"{key.ljust(width)}  {value}", file=out)
    return EXIT_OK


def cmd_check(args, out=None) -> int:
    out = out or sys.stdout
    opts = acceptance.Options(duration=args.duration, flip_gamma_r=args.flip_gamma_r)
    results = acceptance.run_all(opts, only=args.only)
    for res in results:
        print(res.line(), file=out)
    failed = [r.number for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed", file=out)
    return EXIT_OK if not failed else EXIT_FAIL


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"run": cmd_run, "design": cmd_design, "check": cmd_check}[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
