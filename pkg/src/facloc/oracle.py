"""Exact brute-force solvers used as ground truth.

Every open set is enumerated; each one gets its optimal assignment, either
greedily (no bounds) or by min-cost flow (lower bounds and/or capacities).
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Mapping, Optional

from .flow import transport
from .instance import Infeasible, Instance, IntegralSolution, Problem, make_solution


class OracleLimitExceeded(Exception):
    pass


@dataclass(frozen=True)
class OracleLimits:
    max_facilities: int = 12
    max_clients: int = 16
    time_budget: Optional[float] = None  # seconds

    def check(self, inst: Instance) -> None:
        if inst.n > self.max_facilities or inst.m > self.max_clients:
            raise OracleLimitExceeded(
                f"instance {inst.n}x{inst.m} exceeds oracle limits {self.max_facilities}x{self.max_clients}"
            )


def greedy_outlier_assignment(inst: Instance, open_set: Iterable[int], served: int) -> dict[int, int]:
    """Send the ``served`` clients closest to ``open_set`` to their nearest open facility."""
    opened = sorted(open_set)
    if served <= 0:
        return {}
    if not opened:
        raise Infeasible("no open facility to serve clients")
    nearest = []
    for j in range(inst.m):
        i = min(opened, key=lambda i: (inst.c(i, j), i))
        nearest.append((inst.c(i, j), j, i))
    nearest.sort()
    return {j: i for _, j, i in nearest[:served]}


def mincost_assignment_lb(open_set: Iterable[int], inst: Instance,
                          bounds: Optional[Mapping[int, tuple[int, Optional[int]]]] = None,
                          outliers: int = 0) -> IntegralSolution:
    """Cheapest integral assignment to ``open_set`` meeting inflow bounds.

    ``bounds`` maps each open facility to ``(lower, upper)``; by default the
    instance's lower bounds and capacities are used.  At most ``outliers``
    clients may stay unassigned.  Raises :class:`Infeasible`.
    """
    opened = sorted(open_set)
    if bounds is None:
        bounds = {i: (inst.lower(i), inst.upper(i)) for i in opened}
    if not opened:
        if inst.m > outliers:
            raise Infeasible("no open facility")
        return make_solution(inst, [], {})
    cost = [[inst.c(i, j) for i in opened] for j in range(inst.m)]
    res = transport([1] * inst.m, [bounds[i] for i in opened], cost, drop_capacity=outliers)
    assign = {j: opened[b] for (j, b) in res.flow}
    return make_solution(inst, opened, assign)


def _candidate_sets(n: int, k: Optional[int]):
    top = n if k is None else min(k, n)
    for size in range(0, top + 1):
        yield from combinations(range(n), size)


def exact_solve(inst: Instance, problem: Problem | str, limits: OracleLimits = OracleLimits()) -> IntegralSolution:
    """Optimal integral solution by enumeration of open sets.

    Ties go to the lexicographically smallest open set.
    """
    problem = Problem(problem)
    limits.check(inst)
    start = time.monotonic()
    t = inst.t if problem.has_outliers else 0
    k = inst.k if problem is Problem.KFLO else None
    if problem is Problem.KFLO and k is None:
        raise ValueError("kflo needs k")
    best: Optional[IntegralSolution] = None
    best_key = None
    for subset in _candidate_sets(inst.n, k):
        if limits.time_budget is not None and time.monotonic() - start > limits.time_budget:
            raise OracleLimitExceeded("oracle time budget exhausted")
        fcost = sum((inst.f(i) for i in subset), Fraction(0))
        if best is not None and fcost > best.cost:
            continue
        if problem.has_lower_bounds:
            if sum(inst.lower(i) for i in subset) > inst.m:
                continue
        if problem is Problem.LBUBFL:
            if sum(inst.upper(i) for i in subset) < inst.m:
                continue
        try:
            if problem in (Problem.FLO, Problem.KFLO):
                sol = make_solution(inst, subset, greedy_outlier_assignment(inst, subset, inst.m - t))
            elif problem is Problem.LBUBFL:
                sol = mincost_assignment_lb(subset, inst)
            else:
                bounds = {i: (inst.lower(i), None) for i in subset}
                sol = mincost_assignment_lb(subset, inst, bounds, outliers=t)
        except Infeasible:
            continue
        key = (sol.cost, subset)
        if best_key is None or key < best_key:
            best, best_key = sol, key
    if best is None:
        raise Infeasible(f"no feasible {problem.value} solution")
    return best
