"""Command-line entry point: ``swan-isac {run,sweep,check,init-config}``."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

import numpy as np

from .baselines import Scheme, run_scheme
from .errors import SwanError
from .geometry import project_rpa, project_tpa
from .harness import (AXES, ExperimentPlan, Template, aggregate, emit_csv, generate_scenario, load_config,
                      run_plan, write_config)
from .oracles import SUITES

FULL_SCALE_TRIALS = 1024
FULL_SCALE_POWERS = (12.0, 16.0, 20.0, 24.0)


def _parse_values(text: str) -> tuple:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad value list {text!r}") from exc


def _parse_schemes(text: str) -> tuple:
    return tuple(s.strip() for s in text.split(",") if s.strip())


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return value


def _plan_from_args(args) -> ExperimentPlan:
    plan = load_config(args.config) if args.config else ExperimentPlan()
    changes = {}
    if args.full_scale:
        changes["template"] = Template()
        changes["trials"] = FULL_SCALE_TRIALS
    for name in ("seed", "trials", "axis", "values"):
        value = getattr(args, name, None)
        if value is not None:
            changes[name] = value
    if getattr(args, "scheme", None):
        changes["schemes"] = args.scheme
    if getattr(args, "timing", False):
        changes["record_timing"] = True
    return replace(plan, **changes)


def _cmd_run(args) -> int:
    plan = _plan_from_args(args)
    scheme = Scheme.parse(plan.schemes[0])
    layout = plan.template.layout()
    scenario = generate_scenario(plan.template, plan.seed, args.trial)
    result = run_scheme(layout, scenario, scheme, plan.solver)
    rep = result.report
    np.set_printoptions(precision=4, suppress=True)
    print(f"scheme        {scheme.value}")
    print(f"crlb          {rep.crlb:.6g} m^2 ({rep.crlb_db:.3f} dB)")
    print(f"rates         {rep.rates} bit/s/Hz (threshold {scenario.rate_thresholds[0]:g})")
    print(f"feasible      {result.feasible}")
    print(f"iterations    outer {result.outer_iters}, inner {result.inner_iters_total}")
    print(f"power         {result.point.power:.6g} W")
    if result.array.tx_movable:
        print(f"tx positions  {project_tpa(layout, result.point.psi_tilde)}")
        print(f"rx positions  {project_rpa(layout, result.point.phi_tilde)}")
    return 0


def _cmd_sweep(args) -> int:
    plan = _plan_from_args(args)
    records = run_plan(plan)
    emit_csv(records, args.out)
    for s in aggregate(records).values():
        print(f"{s.scheme:12s} {plan.axis}={s.value:<8g} mean {s.mean_crlb_db:8.3f} dB  "
              f"feasible {s.feasible}/{s.feasible + s.infeasible}")
    print(f"wrote {len(records)} rows to {args.out}")
    return 0


def _cmd_check(args) -> int:
    names = args.suite or list(SUITES)
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        print(f"error: unknown suite(s) {unknown}", file=sys.stderr)
        return 2
    ok = True
    for name in names:
        res = SUITES[name]()
        print(res.line())
        ok &= res.passed
    return 0 if ok else 1


def _cmd_init_config(args) -> int:
    plan = ExperimentPlan(template=Template(), trials=FULL_SCALE_TRIALS, values=FULL_SCALE_POWERS)
    write_config(args.out, plan)
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="swan-isac", description="Segmented-waveguide ISAC simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", metavar="PATH", help="INI configuration file")
        p.add_argument("--seed", type=_u64, help="master seed (unsigned 64-bit)")
        p.add_argument("--scheme", type=_parse_schemes, metavar="NAME[,NAME...]")
        p.add_argument("--full-scale", action="store_true", help="full-size layout and 1024 trials")

    run = sub.add_parser("run", help="solve one scenario and print the report")
    common(run)
    run.add_argument("--trial", type=int, default=0, help="trial index of the drawn scenario")
    run.set_defaults(func=_cmd_run)

    sweep = sub.add_parser("sweep", help="Monte Carlo sweep to CSV")
    common(sweep)
    sweep.add_argument("--trials", type=int)
    sweep.add_argument("--axis", choices=sorted(AXES))
    sweep.add_argument("--values", type=_parse_values, metavar="V1,V2,...")
    sweep.add_argument("--out", metavar="PATH", default="sweep.csv")
    sweep.add_argument("--timing", action="store_true", help="record wall-clock time per row")
    sweep.set_defaults(func=_cmd_sweep)

    check = sub.add_parser("check", help="run the numerical self-check suites")
    check.add_argument("suite", nargs="*", help=f"subset of {', '.join(SUITES)} (default: all)")
    check.set_defaults(func=_cmd_check)

    init = sub.add_parser("init-config", help="write a configuration file with the full-scale defaults")
    init.add_argument("--out", metavar="PATH", default="swan.ini")
    init.set_defaults(func=_cmd_init_config)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SwanError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
