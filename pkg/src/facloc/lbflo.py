"""Tri-criteria LBFLO: reduce to FLO with inflated opening costs, then close
facilities that serve too few clients.  Also the LP filtering heuristic.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

from .instance import (
    Facility,
    Instance,
    IntegralSolution,
    Problem,
    StructuralError,
    ViolationReport,
    check_solution,
    make_solution,
)
from .lp import build_lbflo_relaxation, solve_extreme, xname, yname, zname
from .rounding import solve_flo

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LbfloParams:
    alpha: Fraction
    delta: Fraction
    nearest: tuple  # nearest[i]: the lower_bound(i) closest clients of i
    f_prime: tuple


def nearest_clients(inst: Instance, i: int, count: int) -> tuple:
    order = sorted(range(inst.m), key=lambda j: (inst.c(i, j), j))
    return tuple(order[:count])


def reduce_to_flo(inst: Instance, alpha=Fraction(1, 2)) -> tuple[Instance, LbfloParams]:
    """FLO instance without lower bounds whose opening costs pay for later reassignment."""
    alpha = Fraction(alpha)
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if inst.outliers_t is None:
        raise StructuralError("lbflo needs an outlier budget t")
    delta = 2 * alpha / (1 - alpha)
    nearest, fp, facs = [], [], []
    for i, fac in enumerate(inst.facilities):
        N = nearest_clients(inst, i, inst.lower(i))
        cost = fac.open_cost + delta * sum((inst.c(i, j) for j in N), Fraction(0))
        nearest.append(N)
        fp.append(cost)
        facs.append(Facility(fac.id, cost, None, None))
    prime = inst.replace(facilities=tuple(facs))
    return prime, LbfloParams(alpha, delta, tuple(nearest), tuple(fp))


@dataclass
class Closure:
    """What happened to one under-serving facility."""

    facility: int
    clients: tuple
    outliers_near: tuple
    served_elsewhere_near: tuple
    target: Optional[int]
    reassigned: tuple
    dropped: tuple


@dataclass
class LbfloResult:
    solution: IntegralSolution
    report: ViolationReport
    flo_solution: IntegralSolution
    flo_cost: Fraction  # cost of the FLO solution in the inflated instance
    params: LbfloParams
    closures: list = field(default_factory=list)
    outlier_bound: int = 0

    @property
    def outlier_bound_ok(self) -> bool:
        return len(self.solution.outliers) <= self.outlier_bound


def close_and_reassign(inst: Instance, params: LbfloParams, as_prime: IntegralSolution) -> tuple[IntegralSolution, list]:
    """Close every facility serving fewer than ``alpha * lower_bound`` clients.

    A closed facility's clients follow the facility serving its nearest
    lower-bound neighbour, in proportion to how many of those neighbours
    were served elsewhere; the remainder become outliers.
    """
    alpha = params.alpha
    served = as_prime.served()
    closing = sorted(i for i in as_prime.open if served[i] < alpha * inst.lower(i))
    closed = set(closing)
    survivors = sorted(set(as_prime.open) - closed)
    assign = dict(as_prime.assign)
    closures = []
    for i in closing:
        C = tuple(sorted(j for j, a in as_prime.assign.items() if a == i))
        N = params.nearest[i]
        O = tuple(j for j in N if j in as_prime.outliers)
        R = tuple(j for j in N if j not in as_prime.outliers and as_prime.assign[j] != i)
        for j in C:
            del assign[j]
        if not R or not survivors:
            closures.append(Closure(i, C, O, R, None, (), C))
            continue
        jp = min(R, key=lambda j: (inst.c(i, j), j))
        target = as_prime.assign[jp]
        if target in closed:
            target = min(survivors, key=lambda s: (inst.dist[target][s], s))
        count = math.ceil(Fraction(len(R) * len(C), len(R) + len(O)))
        order = sorted(C, key=lambda j: (inst.c(target, j), j))
        moved, dropped = tuple(order[:count]), tuple(order[count:])
        for j in moved:
            assign[j] = target
        closures.append(Closure(i, C, O, R, target, moved, dropped))
    return make_solution(inst, survivors, assign), closures


def solve_lbflo(inst: Instance, alpha=Fraction(1, 2),
                flo_solver: Callable[[Instance], IntegralSolution] = solve_flo) -> LbfloResult:
    """Reduce to FLO, solve it, then close and reassign."""
    prime, params = reduce_to_flo(inst, alpha)
    as_prime = flo_solver(prime)
    flo_cost = as_prime.cost
    as_prime = make_solution(inst, as_prime.open, as_prime.assign)
    sol, closures = close_and_reassign(inst, params, as_prime)
    report = check_solution(inst, sol, Problem.LBFLO)
    bound = math.ceil(Fraction(inst.t) / (1 - params.alpha))
    result = LbfloResult(sol, report, as_prime, flo_cost, params, closures, bound)
    if not result.outlier_bound_ok:
        log.warning("outliers %d exceed ceil(t/(1-alpha)) = %d", len(sol.outliers), bound)
    if sol.cost > flo_cost:
        log.info("reassignment cost %s exceeds the inflated FLO cost %s", sol.cost, flo_cost)
    return result


@dataclass
class FractionalSolution:
    x: dict  # (i, j) -> value
    y: list
    z: list

    def cost(self, inst: Instance) -> Fraction:
        return sum((inst.c(i, j) * v for (i, j), v in self.x.items()), Fraction(0)) + sum(
            (inst.f(i) * v for i, v in enumerate(self.y)), Fraction(0)
        )


@dataclass
class FilterResult:
    lp: FractionalSolution
    filtered: list  # clients with z* >= 1/lambda
    averages: dict  # A_j for unfiltered clients
    representatives: list
    opened: dict  # representative -> facility opened for it
    clusters: dict  # representative -> facilities transferred to it
    rounded: FractionalSolution


def solve_lbflo_lp(inst: Instance, with_outliers: bool = True) -> FractionalSolution:
    lp = build_lbflo_relaxation(inst, with_outliers)
    sol = solve_extreme(lp)
    x = {(i, j): sol[xname(i, j)] for i in range(inst.n) for j in range(inst.m) if sol[xname(i, j)] > 0}
    y = [sol[yname(i)] for i in range(inst.n)]
    z = [sol[zname(j)] if with_outliers else Fraction(0) for j in range(inst.m)]
    return FractionalSolution(x, y, z)


def filter_cluster_open(inst: Instance, lam=Fraction(2), lp: Optional[FractionalSolution] = None,
                        with_outliers: bool = True) -> FilterResult:
    """Filter heavy outliers, pick well-separated representatives, open one facility each."""
    lam = Fraction(lam)
    if lam <= 1:
        raise ValueError("lambda must exceed 1 so unfiltered clients keep some service")
    if lp is None:
        lp = solve_lbflo_lp(inst, with_outliers)
    filtered = [j for j in range(inst.m) if lp.z[j] >= 1 / lam]
    xp = {(i, j): v for (i, j), v in lp.x.items() if j not in filtered}
    served = {}
    for (i, j), v in xp.items():
        served.setdefault(j, []).append((i, v))
    avg = {}
    for j, pairs in served.items():
        mass = sum((v for _, v in pairs), Fraction(0))
        avg[j] = sum((inst.c(i, j) * v for i, v in pairs), Fraction(0)) / mass

    def cc(a, b):
        return inst.dist[inst.n + a][inst.n + b]

    left = sorted(avg, key=lambda j: (avg[j], j))
    reps = []
    while left:
        j = left.pop(0)
        reps.append(j)
        left = [k for k in left if cc(j, k) > 2 * lam * max(avg[j], avg[k])]
    opened = {}
    for j in reps:
        ball = [i for i, v in served[j] if inst.c(i, j) <= lam * avg[j]]
        opened[j] = min(ball, key=lambda i: (inst.f(i), i))
    clusters = {j: [] for j in reps}
    if reps:
        for i in range(inst.n):
            if lp.y[i] > 0:
                owner = min(reps, key=lambda j: (inst.c(i, j), j))
                clusters[owner].append(i)
    owner_of = {i: j for j, fs in clusters.items() for i in fs}
    x_bar: dict = {}
    for (i, k), v in xp.items():
        if i in owner_of:
            tgt = opened[owner_of[i]]
            x_bar[(tgt, k)] = x_bar.get((tgt, k), Fraction(0)) + v
    y_bar = [Fraction(0)] * inst.n
    for i in opened.values():
        y_bar[i] = Fraction(1)
    z_bar = [Fraction(1) if j in filtered else Fraction(0) for j in range(inst.m)]
    return FilterResult(lp, filtered, avg, reps, opened, clusters, FractionalSolution(x_bar, y_bar, z_bar))
