"""kFLO / FLO by iterative rounding of an auxiliary LP over facility copies.

Pipeline per guess of the most expensive open facility:
LP relaxation -> complete solution (split facilities into co-located
copies) -> auxiliary LP state -> iterative rounding -> open every copy with
positive value -> greedy assignment of the ``m - t`` closest clients.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .instance import Infeasible, Instance, IntegralSolution, discretize, make_solution
from .lp import EQ, GE, LE, LinearProgram, build_kflo_relaxation, solve_extreme, xname, yname

log = logging.getLogger(__name__)

PROXIMITY_FACTOR = 5


class InvariantError(AssertionError):
    """An analytic guarantee of the rounding failed on a concrete run."""


@dataclass(frozen=True)
class Copy:
    facility: int
    level: int
    share: Fraction


@dataclass
class CompleteSolution:
    copies: list  # list[Copy]
    bundles: list  # per client, sorted copy indices with x > 0
    radius: list  # per client, max discretized distance over its bundle
    cd: list  # cd[q][j]: discretized distance from copy q to client j
    lp_value: Fraction
    k: int
    t: int
    m: int

    def y(self) -> list:
        return [cp.share for cp in self.copies]


def make_complete(x: dict, y: list, inst: Instance, disc: Optional[Instance] = None, k=None) -> CompleteSolution:
    """Split every facility so each client is served by whole copies.

    ``x[(i, j)]`` and ``y[i]`` are an LP solution.  Facility ``i`` gets one copy
    per distinct positive value in ``{x_ij} | {y_i}``; a client with
    ``x_ij = v`` is served by all copies up to level ``v``.
    """
    disc = disc or discretize(inst)
    copies: list[Copy] = []
    bundles: list[list[int]] = [[] for _ in range(inst.m)]
    for i in range(inst.n):
        if y[i] <= 0:
            continue
        levels = sorted({v for (a, _), v in x.items() if a == i and v > 0} | {y[i]})
        first = len(copies)
        prev = Fraction(0)
        for q, v in enumerate(levels):
            copies.append(Copy(i, q, v - prev))
            prev = v
        for j in range(inst.m):
            v = x.get((i, j), 0)
            if v > 0:
                upto = levels.index(v)
                bundles[j].extend(range(first, first + upto + 1))
    cd = [[disc.c(cp.facility, j) for j in range(inst.m)] for cp in copies]
    radius = [max((cd[q][j] for q in bundles[j]), default=Fraction(0)) for j in range(inst.m)]
    lp_value = sum((inst.c(i, j) * v for (i, j), v in x.items()), Fraction(0)) + sum(
        (inst.f(i) * y[i] for i in range(inst.n)), Fraction(0)
    )
    return CompleteSolution(
        copies=copies,
        bundles=[sorted(b) for b in bundles],
        radius=radius,
        cd=cd,
        lp_value=lp_value,
        k=inst.n if k is None else k,
        t=inst.t,
        m=inst.m,
    )


def is_complete(cs: CompleteSolution) -> bool:
    """Each bundle contains a prefix of its facility's copies and the shares sum to at most one."""
    for j, bundle in enumerate(cs.bundles):
        if sum((cs.copies[q].share for q in bundle), Fraction(0)) > 1:
            return False
        by_fac: dict[int, list[int]] = {}
        for q in bundle:
            by_fac.setdefault(cs.copies[q].facility, []).append(cs.copies[q].level)
        for levels in by_fac.values():
            if sorted(levels) != list(range(len(levels))):
                return False
    return True


@dataclass
class AlpState:
    cs: CompleteSolution
    f: list  # opening cost per copy
    full: set = field(default_factory=set)
    part: set = field(default_factory=set)
    star: set = field(default_factory=set)
    T: list = field(default_factory=list)
    B: list = field(default_factory=list)
    rT: list = field(default_factory=list)
    resp: dict = field(default_factory=dict)
    w: Optional[list] = None
    min_positive: Fraction = Fraction(0)

    @property
    def m(self) -> int:
        return self.cs.m

    def ball(self, j: int, radius) -> frozenset:
        cd = self.cs.cd
        return frozenset(q for q in self.T[j] if cd[q][j] <= radius)

    def check_disjoint(self) -> None:
        stars = sorted(self.star)
        for a in range(len(stars)):
            for b in range(a + 1, len(stars)):
                if self.T[stars[a]] & self.T[stars[b]]:
                    raise InvariantError(f"T sets of C* members {stars[a]} and {stars[b]} overlap")


def alp_initial(cs: CompleteSolution, inst: Instance) -> AlpState:
    """All clients partial, ``T_j = F_j``, current point ``w' = y*``."""
    positives = [cs.cd[q][j] for j in range(cs.m) for q in cs.bundles[j] if cs.cd[q][j] > 0]
    state = AlpState(
        cs=cs,
        f=[inst.f(cp.facility) for cp in cs.copies],
        part=set(range(cs.m)),
        T=[frozenset(b) for b in cs.bundles],
        B=[frozenset() for _ in range(cs.m)],
        rT=list(cs.radius),
        w=cs.y(),
        min_positive=min(positives, default=Fraction(0)),
    )
    return state


def alp_cost(state: AlpState, w: Optional[list] = None) -> Fraction:
    """Auxiliary LP objective at ``w`` (default: the state's current point)."""
    w = state.w if w is None else w
    cd = state.cs.cd
    total = Fraction(0)
    for j in state.part:
        total += sum((cd[q][j] * w[q] for q in state.T[j]), Fraction(0))
    for j in state.full:
        inner = sum((w[q] for q in state.B[j]), Fraction(0))
        total += sum((cd[q][j] * w[q] for q in state.B[j]), Fraction(0)) + (1 - inner) * state.rT[j]
    total += sum((fq * wq for fq, wq in zip(state.f, w)), Fraction(0))
    return total


def wname(q: int) -> str:
    return f"w[{q}]"


def build_alp(state: AlpState) -> LinearProgram:
    cs = state.cs
    lp = LinearProgram()
    cost = list(state.f)
    for j in state.part:
        for q in state.T[j]:
            cost[q] += cs.cd[q][j]
    for j in state.full:
        for q in state.B[j]:
            cost[q] += cs.cd[q][j] - state.rT[j]
    for q in range(len(cs.copies)):
        lp.add_var(wname(q), cost[q])
    lp.constant = sum((state.rT[j] for j in state.full), Fraction(0))
    for j in sorted(state.star):
        lp.add_row({wname(q): 1 for q in state.T[j]}, EQ, 1, f"star[{j}]")
    for j in sorted(state.full):
        if state.B[j] and state.rT[j] > 0:
            lp.add_row({wname(q): 1 for q in state.B[j]}, LE, 1, f"ball[{j}]")
    for j in sorted(state.part):
        if state.T[j]:
            lp.add_row({wname(q): 1 for q in state.T[j]}, LE, 1, f"part[{j}]")
    lp.add_row({wname(q): 1 for q in range(len(cs.copies))}, LE, cs.k, "cardinality")
    served = {wname(q): 0 for q in range(len(cs.copies))}
    for j in state.part:
        for q in state.T[j]:
            served[wname(q)] += 1
    lp.add_row(served, GE, cs.m - cs.t - len(state.full), "outliers")
    return lp


def process_c_star(state: AlpState, j: int) -> None:
    """Keep the T sets of C* disjoint after client ``j`` became full or shrank.

    ``j`` defers to an overlapping C* member whose radius is no larger
    (smallest id); otherwise it joins C* and evicts every overlapping member
    with a strictly larger radius.
    """
    Tj, rj = state.T[j], state.rT[j]
    owners = sorted(o for o in state.star if o != j and state.T[o] & Tj and state.rT[o] <= rj)
    if owners:
        if j in state.star:
            raise InvariantError(f"C* member {j} overlaps {owners[0]}")
        state.resp[j] = owners[0]
    else:
        state.star.add(j)
        state.resp[j] = j
        for o in sorted(state.star):
            if o != j and state.T[o] & Tj and rj < state.rT[o]:
                state.star.discard(o)
                state.resp[o] = j
    state.check_disjoint()


@dataclass(frozen=True)
class Iteration:
    event: str  # "part" or "full"
    client: int
    radius_before: Fraction
    radius_after: Fraction
    cost_before: Fraction  # CostALP_t(w^t)
    cost_after: Fraction  # CostALP_{t+1}(w^t)
    next_cost: Fraction  # CostALP_{t+1}(w^{t+1})


def _sum(w, qs) -> Fraction:
    return sum((w[q] for q in qs), Fraction(0))


def _next_event(state: AlpState):
    w = state.w
    for j in sorted(state.part):
        if state.T[j] and _sum(w, state.T[j]) == 1:
            return "part", j
    for j in sorted(state.full):
        if state.rT[j] > 0 and state.B[j] and _sum(w, state.B[j]) == 1:
            return "full", j
    return None


def _apply_event(state: AlpState, kind: str, j: int) -> None:
    if kind == "part":
        state.part.discard(j)
        state.full.add(j)
    else:
        state.T[j] = state.B[j]
        half = state.rT[j] / 2
        state.rT[j] = half if half >= state.min_positive and half > 0 else Fraction(0)
    state.B[j] = state.ball(j, state.rT[j] / 2)
    process_c_star(state, j)


def iterative_round(state: AlpState, check: bool = True, max_iter: Optional[int] = None) -> list:
    """Run the rounding loop in place; returns the per-iteration record.

    ``state.w`` holds the final extreme point on return.
    """
    history: list[Iteration] = []
    sol = solve_extreme(build_alp(state))
    state.w = [sol[wname(q)] for q in range(len(state.cs.copies))]
    while True:
        ev = _next_event(state)
        if ev is None:
            break
        kind, j = ev
        before = alp_cost(state)
        r0 = state.rT[j]
        _apply_event(state, kind, j)
        after = alp_cost(state)
        lp = build_alp(state)
        if check:
            if after != before:
                raise InvariantError(f"{kind} event on client {j} changed the ALP cost: {before} -> {after}")
            if not lp.is_feasible({wname(q): v for q, v in enumerate(state.w)}):
                raise InvariantError(f"{kind} event on client {j} made the previous point infeasible")
        sol = solve_extreme(lp)
        state.w = [sol[wname(q)] for q in range(len(state.cs.copies))]
        nxt = sol.objective
        if check and nxt > after:
            raise InvariantError(f"ALP optimum rose from {after} to {nxt}")
        history.append(Iteration(kind, j, r0, state.rT[j], before, after, nxt))
        log.debug("event %s client %d radius %s -> %s cost %s", kind, j, r0, state.rT[j], nxt)
        if max_iter is not None and len(history) >= max_iter:
            break
    return history


def fractional_copies(state: AlpState) -> list:
    return [q for q, v in enumerate(state.w) if 0 < v < 1]


def proximity_violations(state: AlpState, inst: Instance, factor=PROXIMITY_FACTOR, discretized: bool = False) -> list:
    """Full clients lacking one unit of ``w`` within ``factor * rT_j``.

    Distances are true distances unless ``discretized`` is set.
    """
    bad = []
    for j in sorted(state.full):
        limit = factor * state.rT[j]
        mass = Fraction(0)
        for q, cp in enumerate(state.cs.copies):
            d = state.cs.cd[q][j] if discretized else inst.c(cp.facility, j)
            if d <= limit:
                mass += state.w[q]
        if mass < 1:
            bad.append((j, mass))
    return bad


def greedy_assign(inst: Instance, opened, served: int) -> dict:
    """Nearest-open assignment of the ``served`` clients closest to ``opened``."""
    opened = sorted(opened)
    if served <= 0:
        return {}
    if not opened:
        raise Infeasible("rounding opened no facility but clients must be served")
    order = []
    for j in range(inst.m):
        i = min(opened, key=lambda i: (inst.c(i, j), i))
        order.append((inst.c(i, j), j, i))
    order.sort()
    return {j: i for _, j, i in order[:served]}


def finalize_and_assign(state: AlpState, inst: Instance, k_mode: bool = True, check: bool = True) -> IntegralSolution:
    """Open the facility of every copy with positive value and assign greedily."""
    opened = sorted({state.cs.copies[q].facility for q, v in enumerate(state.w) if v > 0})
    if check:
        frac = fractional_copies(state)
        if len(frac) > 2:
            raise InvariantError(f"{len(frac)} fractional copies remain")
        bad = proximity_violations(state, inst)
        if bad:
            raise InvariantError(f"proximity fails for clients {bad}")
        if k_mode and len(opened) > state.cs.k + 1:
            raise InvariantError(f"{len(opened)} facilities opened with k = {state.cs.k}")
    assign = greedy_assign(inst, opened, inst.m - inst.t)
    return make_solution(inst, opened, assign)


@dataclass
class RoundingRun:
    """Everything one guess produced, kept for diagnostics."""

    guess: Optional[Fraction]
    facilities: list  # original indices of the restricted universe
    lp_value: Fraction
    initial_alp_cost: Fraction
    state: AlpState
    history: list
    solution: IntegralSolution  # in original indices
    fractional: int
    proximity: list


def run_chain(inst: Instance, k: Optional[int] = None, check: bool = True, guess=None, keep=None) -> RoundingRun:
    """LP -> complete -> ALP -> rounding -> finalize on the facilities ``keep``."""
    keep = list(range(inst.n)) if keep is None else list(keep)
    sub = inst.restrict_facilities(keep)
    k = inst.n if k is None else k
    k = min(k, sub.n)
    lp = build_kflo_relaxation(sub, k)
    sol = solve_extreme(lp)
    x = {(i, j): sol[xname(i, j)] for i in range(sub.n) for j in range(sub.m) if sol[xname(i, j)] > 0}
    y = [sol[yname(i)] for i in range(sub.n)]
    cs = make_complete(x, y, sub, k=k)
    if check and cs.lp_value != sol.objective:
        raise InvariantError("splitting changed the LP objective")
    state = alp_initial(cs, sub)
    initial = alp_cost(state)
    if check and initial > 2 * cs.lp_value:
        raise InvariantError(f"initial ALP cost {initial} exceeds twice the LP value {cs.lp_value}")
    history = iterative_round(state, check=check)
    local = finalize_and_assign(state, sub, k_mode=True, check=check)
    solution = make_solution(
        inst, [keep[i] for i in local.open], {j: keep[i] for j, i in local.assign.items()}
    )
    return RoundingRun(
        guess=guess,
        facilities=keep,
        lp_value=cs.lp_value,
        initial_alp_cost=initial,
        state=state,
        history=history,
        solution=solution,
        fractional=len(fractional_copies(state)),
        proximity=proximity_violations(state, sub),
    )


def solve_kflo(inst: Instance, k: Optional[int] = None, check: bool = True, runs: Optional[list] = None) -> IntegralSolution:
    """Cheapest (by true cost) rounded solution over all guesses of the largest opening cost.

    Pass a list as ``runs`` to collect the per-guess :class:`RoundingRun`.
    """
    if inst.outliers_t is None:
        inst = inst.replace(outliers_t=0)
    if k is None:
        k = inst.k if inst.k is not None else inst.n
    if inst.m - inst.t <= 0:
        return make_solution(inst, [], {})
    best = None
    for g in sorted({inst.f(i) for i in range(inst.n)}):
        keep = [i for i in range(inst.n) if inst.f(i) <= g]
        try:
            run = run_chain(inst, k, check=check, guess=g, keep=keep)
        except Infeasible:
            continue
        if runs is not None:
            runs.append(run)
        if best is None or run.solution.cost < best.cost:
            best = run.solution
    if best is None:
        raise Infeasible("every guess failed")
    return best


def solve_flo(inst: Instance, check: bool = True, runs: Optional[list] = None) -> IntegralSolution:
    return solve_kflo(inst, k=inst.n, check=check, runs=runs)
