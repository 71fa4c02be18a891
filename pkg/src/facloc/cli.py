"""Command line: solve | oracle | check | gen | bench.

Exit codes: 0 ok, 1 input error, 2 infeasible (or, for ``check``, not
exactly feasible).
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path
from typing import Optional

from . import io
from .instance import (
    Infeasible,
    Instance,
    Problem,
    StructuralError,
    check_solution,
    generate_euclidean,
    validate_instance,
)
from .lbflo import solve_lbflo
from .lbubfl import PipelineError, make_tricriteria, solve_lbubfl
from .oracle import OracleLimitExceeded, OracleLimits, exact_solve
from .rounding import solve_flo, solve_kflo

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE = 0, 1, 2
SOLVABLE = ("flo", "kflo", "lbflo", "lbubfl")

log = logging.getLogger("facloc")


class InputError(Exception):
    pass


def _fraction(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}")


def _limits(text: str) -> OracleLimits:
    """``F,C`` or ``F,C,seconds``."""
    parts = text.split(",")
    try:
        if len(parts) == 2:
            return OracleLimits(int(parts[0]), int(parts[1]))
        if len(parts) == 3:
            return OracleLimits(int(parts[0]), int(parts[1]), float(parts[2]))
    except ValueError:
        pass
    raise argparse.ArgumentTypeError("limits must be F,C or F,C,seconds")


def _problem(text: str, allowed) -> Problem:
    if text not in allowed:
        raise InputError(f"unknown problem {text!r}; choose from {', '.join(allowed)}")
    return Problem(text)


def _load_instance(path) -> Instance:
    if path is None:
        raise InputError("--in is required")
    inst = io.load_instance(path)
    bad = validate_instance(inst)
    if bad:
        raise InputError("invalid instance: " + "; ".join(f"{v.kind} {v.points} {v.detail}" for v in bad[:5]))
    return inst


def _params(args) -> dict:
    return {
        "seed": args.seed,
        "alpha": str(args.alpha),
        "ell": str(args.ell),
        "lambda": None if args.lam is None else str(args.lam),
        "cfl_solver": args.cfl_solver,
    }


def run_solver(inst: Instance, problem: Problem, args) -> tuple:
    """Solution plus the problem-specific part of the report."""
    extra: dict = {}
    if problem is Problem.FLO:
        runs: list = []
        sol = solve_flo(inst, runs=runs)
        extra["guesses"] = len(runs)
        extra["max_fractional"] = max((r.fractional for r in runs), default=0)
    elif problem is Problem.KFLO:
        if inst.k is None:
            raise InputError("kflo needs k in the instance")
        runs = []
        sol = solve_kflo(inst, runs=runs)
        extra["guesses"] = len(runs)
        extra["max_fractional"] = max((r.fractional for r in runs), default=0)
    elif problem is Problem.LBFLO:
        res = solve_lbflo(inst, args.alpha)
        sol = res.solution
        extra.update(alpha=str(res.params.alpha), delta=str(res.params.delta),
                     flo_cost=str(res.flo_cost), closures=len(res.closures),
                     outlier_bound=res.outlier_bound, outlier_bound_ok=res.outlier_bound_ok)
    else:
        st = None
        if args.st_file:
            data = io.read_json(args.st_file)
            raw = io.solution_from_dict(inst, data)
            st = make_tricriteria(inst, raw.open, raw.assign, args.ell)
        res = solve_lbubfl(inst, args.ell, args.cfl_solver, st=st, lam=args.lam)
        sol = res.solution
        extra.update(alpha=str(res.alpha), delta=str(res.delta),
                     connection_factor=str(res.connection_factor), st_cost=str(res.st.cost),
                     trace=res.trace)
    return sol, extra


def _report(inst, sol, problem, args, extra, elapsed) -> dict:
    rep = {
        "problem": problem.value,
        "params": _params(args),
        "cost": str(sol.cost),
        "cost_facility": str(sol.cost_facility),
        "cost_connect": str(sol.cost_connect),
        "open": len(sol.open),
        "violations": check_solution(inst, sol, problem).as_dict(),
        **extra,
    }
    if args.timing:
        rep["seconds"] = round(elapsed, 3)
    return rep


def _emit(args, inst, sol, report) -> None:
    sol_d = io.solution_to_dict(inst, sol)
    if args.out:
        io.write_json(args.out, sol_d)
        report_path = args.report or str(Path(args.out).with_suffix(".report.json"))
        io.write_json(report_path, report)
    else:
        sys.stdout.write(io.dumps({"solution": sol_d, "report": report}))


def cmd_solve(args) -> int:
    problem = _problem(args.problem, SOLVABLE)
    inst = _load_instance(args.inp)
    start = time.perf_counter()
    sol, extra = run_solver(inst, problem, args)
    _emit(args, inst, sol, _report(inst, sol, problem, args, extra, time.perf_counter() - start))
    return EXIT_OK


def cmd_oracle(args) -> int:
    problem = _problem(args.problem, [p.value for p in Problem])
    inst = _load_instance(args.inp)
    start = time.perf_counter()
    sol = exact_solve(inst, problem, args.limits)
    _emit(args, inst, sol, _report(inst, sol, problem, args, {"algorithm": "exact"}, time.perf_counter() - start))
    return EXIT_OK


def cmd_check(args) -> int:
    problem = _problem(args.problem, [p.value for p in Problem])
    inst = _load_instance(args.inp)
    if not args.solution:
        raise InputError("--solution is required")
    data = io.read_json(args.solution)
    if "solution" in data and "open" not in data:
        data = data["solution"]
    sol = io.solution_from_dict(inst, data)
    rep = check_solution(inst, sol, problem).as_dict()
    rep["cost"] = str(sol.cost)
    sys.stdout.write(io.dumps(rep))
    return EXIT_OK if rep["feasible"] else EXIT_INFEASIBLE


def _bounds(lower, capacity):
    if lower is None and capacity is None:
        return None
    if lower is not None and "-" in lower:
        lo, hi = lower.split("-")
        return ((int(lo), int(hi)), capacity)
    return (None if lower is None else int(lower), capacity)


def cmd_gen(args) -> int:
    inst = generate_euclidean(args.n, args.m, args.seed, (Fraction(0), args.cost_max),
                              _bounds(args.lower, args.capacity), k=args.k, t=args.t)
    if args.out:
        io.save_instance(args.out, inst)
    else:
        sys.stdout.write(io.dumps(io.instance_to_dict(inst)))
    return EXIT_OK


def _parse_sizes(text: str) -> list:
    sizes = []
    for part in text.split(","):
        try:
            n, m = part.lower().split("x")
            sizes.append((int(n), int(m)))
        except ValueError:
            raise InputError(f"bad size {part!r}; use NxM[,NxM...]")
    return sizes


def bench_instance(problem: Problem, n: int, m: int, seed: int) -> Instance:
    """Deterministic benchmark instance; bounds are chosen so the oracle finds a solution."""
    if problem is Problem.KFLO:
        return generate_euclidean(n, m, seed, k=max(1, n // 2), t=min(2, m // 4))
    if problem is Problem.FLO:
        return generate_euclidean(n, m, seed, t=min(2, m // 4))
    if problem is Problem.LBFLO:
        return generate_euclidean(n, m, seed, bounds=((1, 3), None), t=min(2, m // 4))
    B = min(3, m)
    U = max(B + 1, -(-m // n))
    return generate_euclidean(n, m, seed, bounds=(B, U))


def _bench_row(job) -> dict:
    problem, n, m, seed, use_oracle, args = job
    inst = bench_instance(problem, n, m, seed)
    row = {"id": f"{problem.value}-{n}x{m}-s{seed}", "problem": problem.value, "n": n, "m": m, "seed": seed}
    start = time.perf_counter()
    try:
        sol, _ = run_solver(inst, problem, args)
    except (Infeasible, PipelineError) as e:
        row.update(status="infeasible", detail=str(e))
        return row
    elapsed = time.perf_counter() - start
    row.update(status="ok", cost=str(sol.cost), violations=check_solution(inst, sol, problem).as_dict())
    row["oracle_cost"] = row["ratio"] = None
    if use_oracle:
        try:
            opt = exact_solve(inst, problem).cost
            row["oracle_cost"] = str(opt)
            row["ratio"] = str(sol.cost / opt) if opt else ("1" if sol.cost == 0 else "inf")
        except (Infeasible, OracleLimitExceeded) as e:
            row["oracle_skipped"] = str(e)
    if args.timing:
        row["seconds"] = round(elapsed, 3)
    return row


def cmd_bench(args) -> int:
    problem = _problem(args.problem, SOLVABLE)
    sizes = _parse_sizes(args.sizes)
    jobs = [(problem, n, m, args.seed + s, not args.no_oracle, args)
            for n, m in sizes for s in range(args.seeds)]
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            rows = list(pool.map(_bench_row, jobs))
    else:
        rows = [_bench_row(j) for j in jobs]
    rows.sort(key=lambda r: (r["n"], r["m"], r["seed"]))
    ratios = [Fraction(r["ratio"]) for r in rows if r.get("ratio") not in (None, "inf")]
    report = {
        "problem": problem.value,
        "params": _params(args),
        "rows": rows,
        "max_ratio": str(max(ratios)) if ratios else None,
        "mean_ratio": str(sum(ratios, Fraction(0)) / len(ratios)) if ratios else None,
    }
    if args.out:
        io.write_json(args.out, report)
    else:
        sys.stdout.write(io.dumps(report))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--in", dest="inp", help="instance JSON file")
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--problem", default="flo")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--alpha", type=_fraction, default=Fraction(1, 2), help="LBFLO closing threshold")
    common.add_argument("--ell", type=_fraction, default=Fraction(3), help="LBUBFL tri-criteria parameter")
    common.add_argument("--lambda", dest="lam", type=_fraction, default=None,
                        help="filtering separation for the LBUBFL start (default: ell)")
    common.add_argument("--cfl-solver", choices=["auto", "local", "exact"], default="auto")
    common.add_argument("--limits", type=_limits, default=OracleLimits(), help="oracle limits F,C[,seconds]")
    common.add_argument("--st-file", help="external tri-criteria start (solution JSON)")
    common.add_argument("--format", choices=["json"], default="json")
    common.add_argument("--timing", action="store_true", help="include wall times (breaks byte-identical output)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="facloc", description="Facility location with outliers and bounds.")
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("solve", parents=[common], help="run an approximation algorithm")
    s.add_argument("--report", help="report file (default: OUT with .report.json)")
    o = sub.add_parser("oracle", parents=[common], help="exact solution by enumeration")
    o.add_argument("--report")
    c = sub.add_parser("check", parents=[common], help="violation report for a solution")
    c.add_argument("--solution")
    g = sub.add_parser("gen", parents=[common], help="random Euclidean instance")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--m", type=int, required=True)
    g.add_argument("--cost-max", type=_fraction, default=Fraction(1))
    g.add_argument("--lower", help="uniform lower bound, or LO-HI for per-facility random bounds")
    g.add_argument("--capacity", type=int)
    g.add_argument("--k", type=int)
    g.add_argument("--t", type=int)
    b = sub.add_parser("bench", parents=[common], help="solver versus oracle on random instances")
    b.add_argument("--seeds", type=int, default=5)
    b.add_argument("--sizes", default="4x6")
    b.add_argument("--no-oracle", action="store_true")
    b.add_argument("--jobs", type=int, default=1)
    return p


COMMANDS = {"solve": cmd_solve, "oracle": cmd_oracle, "check": cmd_check, "gen": cmd_gen, "bench": cmd_bench}


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_INPUT if e.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (InputError, io.FormatError, StructuralError, OracleLimitExceeded, OSError, ValueError, KeyError,
            TypeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except (Infeasible, PipelineError) as e:
        print(f"infeasible: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
