"""Acceptance criteria; one PASS/FAIL line per criterion is printed after the run."""

import itertools
import time
from fractions import Fraction as F
from functools import lru_cache

from conftest import criterion
from facloc.cfl import exact_cfl
from facloc.cli import main
from facloc.instance import Infeasible, Problem, check_solution, generate_euclidean
from facloc.lbflo import solve_lbflo
from facloc.lbubfl import build_i1, build_i2, build_icap, solve_lbubfl
from facloc.oracle import exact_solve, mincost_assignment_lb
from facloc.rounding import solve_flo, solve_kflo
from util import flo_case, kflo_case, lbflo_case, lbubfl_case

KFLO_SEEDS = range(60)


def ratio(cost, opt):
    if opt == 0:
        return F(1) if cost == 0 else F(10**9)
    return cost / opt


@lru_cache(maxsize=None)
def kflo_corpus():
    rows = []
    start = time.perf_counter()
    for seed in KFLO_SEEDS:
        inst = kflo_case(seed)
        runs = []
        sol = solve_kflo(inst, runs=runs)
        rows.append((inst, sol, runs))
    return rows, time.perf_counter() - start


def test_criterion_1_pseudo_integrality():
    with criterion(1, "at most 2 fractional facilities per rounding run, under 60 s") as box:
        rows, seconds = kflo_corpus()
        runs = [r for _, _, rs in rows for r in rs]
        worst = max(r.fractional for r in runs)
        box["detail"] = f"{len(rows)} instances, {len(runs)} runs, max fractional {worst}"
        assert len(rows) >= 50
        assert worst <= 2
        assert seconds < 60


def test_criterion_2_proximity():
    with criterion(2, "one unit of open mass within 5 rT_j for every full client") as box:
        rows, _ = kflo_corpus()
        bad = [(i, r.proximity) for i, (_, _, rs) in enumerate(rows) for r in rs if r.proximity]
        full = sum(len(r.state.full) for _, _, rs in rows for r in rs)
        box["detail"] = f"{full} full clients checked, {len(bad)} violations"
        assert bad == []


def test_criterion_3_kflo_guarantee():
    with criterion(3, "kFLO cost <= 11 OPT, |open| <= k+1, served >= m-t") as box:
        rows, _ = kflo_corpus()
        worst = F(0)
        for inst, sol, _ in rows:
            opt = exact_solve(inst, Problem.KFLO).cost
            worst = max(worst, ratio(sol.cost, opt))
            assert sol.cost <= 11 * opt, inst
            assert len(sol.open) <= inst.k + 1
            assert len(sol.assign) >= inst.m - inst.t
        box["detail"] = f"{len(rows)} instances, max ratio {float(worst):.4f}"


def test_criterion_4_flo_guarantee():
    with criterion(4, "FLO cost <= 11 OPT") as box:
        worst = F(0)
        seeds = range(55)
        for seed in seeds:
            inst = flo_case(seed)
            sol = solve_flo(inst)
            opt = exact_solve(inst, Problem.FLO).cost
            worst = max(worst, ratio(sol.cost, opt))
            assert sol.cost <= 11 * opt, seed
        box["detail"] = f"{len(seeds)} instances, max ratio {float(worst):.4f}"


def test_criterion_5_lbflo_tricriteria():
    with criterion(5, "LBFLO: alpha L_i served, outliers <= 2t (logged), cost <= 33 OPT") as box:
        alpha = F(1, 2)
        worst, outlier_excess, closures = F(0), 0, 0
        seeds = range(35)
        for seed in seeds:
            inst = lbflo_case(seed)
            res = solve_lbflo(inst, alpha)
            sol = res.solution
            served = sol.served()
            assert all(served[i] >= alpha * inst.lower(i) for i in sol.open), seed
            opt = exact_solve(inst, Problem.LBFLO).cost
            worst = max(worst, ratio(sol.cost, opt))
            assert sol.cost <= 33 * opt, seed
            outlier_excess += not res.outlier_bound_ok
            closures += len(res.closures)
        box["detail"] = (f"{len(seeds)} instances, max ratio {float(worst):.4f}, "
                         f"{closures} closures, outlier-bound violations {outlier_excess}")


def test_criterion_6_monotonicity():
    with criterion(6, "exact ALP cost equality at every event, initial ALP <= 2 LP") as box:
        rows, _ = kflo_corpus()
        events = 0
        for _, _, runs in rows:
            for run in runs:
                assert run.initial_alp_cost <= 2 * run.lp_value
                for it in run.history:
                    assert it.cost_after == it.cost_before
                    assert it.next_cost <= it.cost_after
                    events += 1
        box["detail"] = f"{events} events checked"


def test_criterion_7_lbubfl_pipeline():
    with criterion(7, "LBUBFL: lb_factor >= 1 and ub_factor <= 3") as box:
        done, worst_ub = 0, F(0)
        seed = 0
        while done < 35:
            inst = lbubfl_case(seed)
            seed += 1
            try:
                exact_solve(inst, Problem.LBUBFL)
            except Infeasible:
                continue
            rep = check_solution(inst, solve_lbubfl(inst, 3).solution, Problem.LBUBFL)
            assert rep.lb_factor >= 1 and rep.ub_factor <= 3, seed - 1
            worst_ub = max(worst_ub, rep.ub_factor)
            done += 1
        box["detail"] = f"{done} feasible instances, max ub_factor {worst_ub}"


def test_criterion_8_cost_chain():
    with criterion(8, "Cost(O1) <= Cost(St)+Cost(O), Cost(O2) <= 2 Cost(O1), Cost(Ocap) <= (1+2 delta) Cost(O2)") as box:
        done, seed = 0, 0
        while done < 22:
            inst = lbubfl_case(seed)
            seed += 1
            try:
                opt = exact_solve(inst, Problem.LBUBFL).cost
            except Infeasible:
                continue
            res = solve_lbubfl(inst, 3)
            st = res.st
            if len(st.open) < 2:
                continue
            o1 = exact_solve(build_i1(inst, st), Problem.LBUBFL).cost
            o2 = exact_solve(build_i2(inst, st), Problem.LBFL).cost
            ocap = exact_cfl(build_icap(inst, st).cfl).cost
            assert o1 <= st.cost + opt, seed - 1
            assert o2 <= 2 * o1, seed - 1
            assert ocap <= (1 + 2 * res.delta) * o2, seed - 1
            done += 1
        box["detail"] = f"{done} instances with at least two start facilities"


def brute_assignment(inst, opened, outliers):
    best = None
    for choice in itertools.product(list(opened) + [None], repeat=inst.m):
        if choice.count(None) > outliers:
            continue
        if any(choice.count(i) < inst.lower(i) or (inst.upper(i) is not None and choice.count(i) > inst.upper(i))
               for i in opened):
            continue
        cost = sum(inst.c(i, j) for j, i in enumerate(choice) if i is not None)
        best = cost if best is None else min(best, cost)
    return best


def test_criterion_9_oracle_consistency():
    with criterion(9, "kFLO with k=n equals FLO; flow assignment equals enumeration") as box:
        for seed in range(20):
            inst = generate_euclidean(4, 6, 500 + seed, (0, 2), k=4, t=seed % 3)
            assert exact_solve(inst, Problem.KFLO).cost == exact_solve(inst, Problem.FLO).cost
        checked = 0
        for seed in range(20):
            inst = generate_euclidean(3, 1 + seed % 6, 600 + seed, bounds=((0, 2), 3))
            for size in (1, 2, 3):
                for opened in itertools.combinations(range(3), size):
                    outliers = seed % 2
                    expected = brute_assignment(inst, opened, outliers)
                    try:
                        got = mincost_assignment_lb(opened, inst, outliers=outliers).cost_connect
                    except Infeasible:
                        got = None
                    assert got == expected, (seed, opened)
                    checked += 1
        box["detail"] = f"20 kFLO/FLO pairs, {checked} assignments compared"


def test_criterion_10_determinism(tmp_path):
    with criterion(10, "identical bytes on re-run") as box:
        inst_path = tmp_path / "i.json"
        assert main(["gen", "--n", "4", "--m", "8", "--seed", "9", "--lower", "2", "--capacity", "3",
                     "--k", "2", "--t", "1", "--out", str(inst_path)]) == 0
        commands = {
            "gen": ["gen", "--n", "4", "--m", "8", "--seed", "9", "--k", "2", "--t", "1"],
            "bench": ["bench", "--problem", "kflo", "--seeds", "3", "--sizes", "3x5", "--seed", "4"],
        }
        for problem in ("flo", "kflo", "lbflo", "lbubfl"):
            commands[f"solve-{problem}"] = ["solve", "--problem", problem, "--in", str(inst_path)]
        commands["oracle"] = ["oracle", "--problem", "lbubfl", "--in", str(inst_path)]
        for name, argv in commands.items():
            outputs = []
            for run in range(2):
                out = tmp_path / f"{name}-{run}.json"
                assert main(argv + ["--out", str(out)]) == 0, name
                files = [out] + ([out.with_suffix(".report.json")] if argv[0] in ("solve", "oracle") else [])
                outputs.append([p.read_bytes() for p in files])
            assert outputs[0] == outputs[1], name
        box["detail"] = f"{len(commands)} commands compared"
