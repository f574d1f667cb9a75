"""Command-line front end.

Subcommands: solve (static solvers on a scenario), simulate (one episode),
sweep (charge / availability / ensemble experiments), compare (all policies on
one scenario), gen (write built-in scenarios), bench (solver timings).
Exit codes: 0 success, 2 infeasible/too-large, 1 usage or internal error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from . import exact, relax
from .bench import BENCH_CSV_HEADER, run_bench
from .errors import (
    ChainAllocError,
    Infeasible,
    LPInfeasible,
    MinLifetimeViolated,
    PolicyFailure,
    RoundingInfeasible,
    TooLarge,
)
from .faa import LOG_CSV_HEADER, faa_allocate, log_csv_rows
from .model import load_scenario, save_scenario
from .objective import Assignment, system_lifetime
from .problem import Problem
from .reports import write_csv
from .scenarios import BUILTIN
from .sim import (
    ENSEMBLE_CSV_HEADER,
    SWEEP_CSV_HEADER,
    TRACE_CSV_HEADER,
    EnsembleConfig,
    Policy,
    SweepSpec,
    generate_ensemble,
    run_ensemble_sweep,
    run_episode,
    run_usecase_sweep,
)

log = logging.getLogger("chainalloc")

_INFEASIBLE_ERRORS = (
    TooLarge, Infeasible, LPInfeasible, RoundingInfeasible,
    MinLifetimeViolated, PolicyFailure,
)

SOLVE_CSV_HEADER = [
    "solver", "system_lifetime_intervals", "bottleneck", "cost_ratio",
    "nodes", "evaluated", "pruned", "ms", "opt_lp", "integral_cost",
    "int_worst", "int_best", "af", "mapping",
]


def _mapping_str(a: Assignment) -> str:
    parts = [f"{rid.device}/{rid.app}/{rid.seq}={host}"
             for rid, host in sorted(a.mapping.items())]
    return "|".join(parts)


def _percent_range(text: str) -> list[float]:
    try:
        start, stop, step = (float(x) for x in text.split(":"))
    except ValueError:
        raise ValueError(f"range {text!r} must look like START:STOP:STEP") from None
    if step <= 0 or stop < start:
        raise ValueError(f"empty or descending range {text!r}")
    values = []
    v = start
    while v <= stop + 1e-9:
        values.append(round(v, 9))
        v += step
    return values


def cmd_solve(args) -> int:
    scenario = load_scenario(args.scenario)
    p = Problem(scenario)
    rows = []
    for solver in args.solver.split(","):
        solver = solver.strip()
        if solver == "brute":
            res = exact.brute_force_solve(scenario, cap=args.cap, problem=p)
            rows.append(_solve_row(res.solver, scenario, res.assignment, p, res))
        elif solver == "bb":
            res = exact.branch_and_bound_solve(scenario, cap=args.cap, problem=p)
            rows.append(_solve_row(res.solver, scenario, res.assignment, p, res))
        elif solver == "faa":
            assignment, log, report = faa_allocate(scenario, problem=p)
            rows.append(_solve_row("faa", scenario, assignment, p, None))
            if args.log:
                write_csv(args.log, LOG_CSV_HEADER, log_csv_rows(log))
        elif solver == "lp":
            rep = relax.relax_solve(scenario, problem=p)
            rows.append(_solve_row("lp", scenario, rep.integral, p, None, rep))
        else:
            print(f"unknown solver {solver!r}", file=sys.stderr)
            return 1
    for row in rows:
        print(f"{row[0]}: lifetime={row[1]} intervals, bottleneck={row[2]}")
    if args.out:
        write_csv(args.out, SOLVE_CSV_HEADER, rows)
    return 0


def _solve_row(name, scenario, assignment, p, res, relax_report=None) -> list:
    report = system_lifetime(scenario, assignment, problem=p)
    stats = res.stats.csv_row() if res is not None else ["", "", "", ""]
    ratio = repr(float(res.objective)) if res is not None else ""
    rx = (
        relax_report.csv_row() if relax_report is not None else ["", "", "", "", ""]
    )
    return [name, repr(report.system_lifetime), report.bottleneck, ratio,
            *stats, *rx, _mapping_str(assignment)]


def cmd_simulate(args) -> int:
    scenario = load_scenario(args.scenario)
    trace = run_episode(
        scenario, Policy(args.policy), realloc_every=args.realloc, seed=args.seed,
        cap=args.cap,
    )
    print(f"{args.policy}: system lifetime {trace.system_lifetime} intervals"
          + (f" (first death: {trace.cause})" if trace.cause else ""))
    if args.out:
        write_csv(args.out, TRACE_CSV_HEADER, trace.csv_rows())
    return 0


def _parse_sweep(text: str) -> tuple[str, str | None, list[float]]:
    if "=" not in text:
        raise ValueError("sweep must look like KEY=START:STOP:STEP")
    key, rng = text.split("=", 1)
    device = None
    if "." in key:
        key, device = key.split(".", 1)
    if key not in ("charge", "availability", "functions"):
        raise ValueError(f"unknown sweep key {key!r}")
    return key, device, _percent_range(rng)


def cmd_sweep(args) -> int:
    key, device, values = _parse_sweep(args.sweep)
    policies = tuple(Policy(x) for x in args.policy.split(","))
    if key == "functions":
        lengths = tuple(int(v) for v in values)
        seeds = tuple(range(args.seed, args.seed + args.repeats))
        rows = run_ensemble_sweep(lengths, seeds, policies=policies, cap=args.cap)
        header = ENSEMBLE_CSV_HEADER
    else:
        if not args.scenario:
            print("sweep over a scenario needs --scenario", file=sys.stderr)
            return 1
        base = load_scenario(args.scenario)
        if key == "charge":
            if not device:
                print("charge sweep needs a device: charge.<device>=...", file=sys.stderr)
                return 1
            devices = (device,)
        else:
            devices = tuple(device.split("+")) if device else tuple(
                d.id for d in base.devices if d.availability is not None
            )
            if not devices:
                print("availability sweep: no windowed devices; name them as "
                      "availability.<dev>+<dev>=...", file=sys.stderr)
                return 1
        spec = SweepSpec(kind=key, devices=devices, values=tuple(values),
                         policies=policies, realloc_every=args.realloc,
                         seed=args.seed, cap=args.cap)
        rows = run_usecase_sweep(base, spec)
        header = SWEEP_CSV_HEADER
    out_rows = [r.csv_row() for r in rows]
    for r in out_rows:
        print(",".join(str(c) for c in r))
    if args.out:
        write_csv(args.out, header, out_rows)
    return 0


def cmd_compare(args) -> int:
    scenario = load_scenario(args.scenario)
    lifetimes = {}
    for policy in (Policy.EACH, Policy.MANUAL, Policy.FAA, Policy.OPTIMAL):
        trace = run_episode(scenario, policy, realloc_every=args.realloc,
                            seed=args.seed, cap=args.cap)
        lifetimes[policy.value] = trace.system_lifetime
    each = lifetimes["each"]
    rows = []
    for name, life in sorted(lifetimes.items()):
        inc = 0.0 if each == 0 else 100.0 * (life - each) / each
        rows.append([name, life, repr(inc)])
        print(f"{name}: {life} intervals ({inc:+.1f}% vs each)")
    if args.out:
        write_csv(args.out, ["policy", "system_lifetime_intervals",
                             "increment_pct_vs_each"], rows)
    return 0


def cmd_gen(args) -> int:
    if args.name == "ensemble":
        cfg = EnsembleConfig(functions_per_device=args.functions)
        scenario = generate_ensemble(cfg, args.seed)[0]
    elif args.name in BUILTIN:
        scenario = BUILTIN[args.name]()
    else:
        print(f"unknown scenario {args.name!r}; choose from "
              f"{', '.join([*BUILTIN, 'ensemble'])}", file=sys.stderr)
        return 1
    save_scenario(scenario, args.out)
    print(f"wrote {args.out}")
    return 0


def cmd_bench(args) -> int:
    rows = [r.csv_row() for r in run_bench(
        max_functions=args.functions, reps=args.reps, seed=args.seed,
    )]
    for r in rows:
        print(",".join(str(c) for c in r))
    if args.out:
        write_csv(args.out, BENCH_CSV_HEADER, rows)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="chainalloc",
        description="Allocate chained application functions across a device pool "
                    "to maximize the minimum Tier-1 battery lifetime.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="run static solvers on a scenario")
    solve.add_argument("--scenario", required=True)
    solve.add_argument("--solver", default="faa",
                       help="comma list from {brute,bb,lp,faa}")
    solve.add_argument("--cap", type=int, default=exact.DEFAULT_CAP)
    solve.add_argument("--out")
    solve.add_argument("--log", help="write the faa orchestration log CSV here")
    solve.set_defaults(fn=cmd_solve)

    simulate = sub.add_parser("simulate", help="run one battery-drain episode")
    simulate.add_argument("--scenario", required=True)
    simulate.add_argument("--policy", default="faa",
                          choices=[p.value for p in Policy])
    simulate.add_argument("--realloc", type=int, default=30)
    simulate.add_argument("--seed", type=int, default=0)
    simulate.add_argument("--cap", type=int, default=exact.DEFAULT_CAP)
    simulate.add_argument("--out")
    simulate.set_defaults(fn=cmd_simulate)

    sweep = sub.add_parser("sweep", help="sweep a scenario knob across policies")
    sweep.add_argument("--scenario")
    sweep.add_argument("--sweep", required=True,
                       help="charge.<dev>=10:100:10 | availability[.<dev>+<dev>]=0:60:6 "
                            "| functions=1:6:1")
    sweep.add_argument("--policy", default="faa,manual",
                       help="comma list of policies to compare against each")
    sweep.add_argument("--realloc", type=int, default=30)
    sweep.add_argument("--seed", type=int, default=0)
    sweep.add_argument("--repeats", type=int, default=5,
                       help="seeds per point for the ensemble sweep")
    sweep.add_argument("--cap", type=int, default=exact.DEFAULT_CAP)
    sweep.add_argument("--out")
    sweep.set_defaults(fn=cmd_sweep)

    compare = sub.add_parser("compare", help="episode lifetimes for every policy")
    compare.add_argument("--scenario", required=True)
    compare.add_argument("--realloc", type=int, default=30)
    compare.add_argument("--seed", type=int, default=0)
    compare.add_argument("--cap", type=int, default=exact.DEFAULT_CAP)
    compare.add_argument("--out")
    compare.set_defaults(fn=cmd_compare)

    gen = sub.add_parser("gen", help="write a built-in scenario file")
    gen.add_argument("--name", required=True)
    gen.add_argument("--out", required=True)
    gen.add_argument("--functions", type=int, default=6)
    gen.add_argument("--seed", type=int, default=0)
    gen.set_defaults(fn=cmd_gen)

    bench = sub.add_parser("bench", help="solver and kernel-backend timings")
    bench.add_argument("--functions", type=int, default=10)
    bench.add_argument("--reps", type=int, default=10)
    bench.add_argument("--seed", type=int, default=1)
    bench.add_argument("--out")
    bench.set_defaults(fn=cmd_bench)

    return ap


def main(argv: list[str] | None = None) -> int:
    level = os.environ.get("CHAINALLOC_LOG", "error").upper()
    logging.basicConfig(level=getattr(logging, level, logging.ERROR))
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 1 if e.code not in (0, None) else 0
    try:
        return args.fn(args)
    except _INFEASIBLE_ERRORS as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return 2
    except ChainAllocError as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return 1
    except (OSError, ValueError, NotImplementedError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
