"""Instances, integral solutions, cost evaluation and violation reports.

Points of the metric are indexed facilities first, then clients: facility
``i`` is point ``i`` and client ``j`` is point ``n + j``.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Iterable, Mapping, NamedTuple, Optional, Sequence

INF = math.inf


class Problem(str, Enum):
    FLO = "flo"
    KFLO = "kflo"
    LBFLO = "lbflo"
    LBFL = "lbfl"
    LBUBFL = "lbubfl"

    @property
    def has_outliers(self) -> bool:
        return self in (Problem.FLO, Problem.KFLO, Problem.LBFLO)

    @property
    def has_lower_bounds(self) -> bool:
        return self in (Problem.LBFLO, Problem.LBFL, Problem.LBUBFL)


class StructuralError(ValueError):
    """Raised when an instance or solution refers to unknown entities."""


class Infeasible(Exception):
    """Raised when no feasible solution exists for the requested problem."""


@dataclass(frozen=True)
class Facility:
    id: str
    open_cost: Fraction
    lower_bound: Optional[int] = None
    capacity: Optional[int] = None


@dataclass(frozen=True)
class Instance:
    facilities: tuple[Facility, ...]
    clients: tuple[str, ...]
    dist: tuple[tuple[Fraction, ...], ...]
    k: Optional[int] = None
    outliers_t: Optional[int] = None

    @property
    def n(self) -> int:
        return len(self.facilities)

    @property
    def m(self) -> int:
        return len(self.clients)

    def c(self, i: int, j: int) -> Fraction:
        """Distance between facility ``i`` and client ``j``."""
        return self.dist[i][self.n + j]

    def f(self, i: int) -> Fraction:
        return self.facilities[i].open_cost

    def lower(self, i: int) -> int:
        return self.facilities[i].lower_bound or 0

    def upper(self, i: int) -> Optional[int]:
        return self.facilities[i].capacity

    @property
    def t(self) -> int:
        return self.outliers_t or 0

    def facility_index(self) -> dict[str, int]:
        return {fac.id: i for i, fac in enumerate(self.facilities)}

    def client_index(self) -> dict[str, int]:
        return {cid: j for j, cid in enumerate(self.clients)}

    def replace(self, **changes) -> "Instance":
        values = dict(
            facilities=self.facilities,
            clients=self.clients,
            dist=self.dist,
            k=self.k,
            outliers_t=self.outliers_t,
        )
        values.update(changes)
        return Instance(**values)

    def restrict_facilities(self, keep: Sequence[int]) -> "Instance":
        """Sub-instance on the facilities ``keep`` (in that order), all clients."""
        points = list(keep) + [self.n + j for j in range(self.m)]
        dist = tuple(tuple(self.dist[a][b] for b in points) for a in points)
        k = None if self.k is None else min(self.k, len(keep))
        return Instance(
            facilities=tuple(self.facilities[i] for i in keep),
            clients=self.clients,
            dist=dist,
            k=k,
            outliers_t=self.outliers_t,
        )


@dataclass(frozen=True)
class IntegralSolution:
    open: frozenset[int]
    assign: Mapping[int, int]
    outliers: frozenset[int]
    cost_facility: Fraction
    cost_connect: Fraction

    @property
    def cost(self) -> Fraction:
        return self.cost_facility + self.cost_connect

    def served(self) -> dict[int, int]:
        counts = {i: 0 for i in self.open}
        for i in self.assign.values():
            counts[i] = counts.get(i, 0) + 1
        return counts


def make_solution(inst: Instance, open_: Iterable[int], assign: Mapping[int, int]) -> IntegralSolution:
    """Build a solution; unassigned clients become outliers."""
    opened = frozenset(open_)
    assign = dict(sorted(assign.items()))
    for j, i in assign.items():
        if not 0 <= j < inst.m or not 0 <= i < inst.n:
            raise StructuralError(f"unknown assignment {j} -> {i}")
        if i not in opened:
            raise StructuralError(f"client {inst.clients[j]} assigned to closed facility {inst.facilities[i].id}")
    outliers = frozenset(j for j in range(inst.m) if j not in assign)
    return IntegralSolution(
        open=opened,
        assign=assign,
        outliers=outliers,
        cost_facility=sum((inst.f(i) for i in opened), Fraction(0)),
        cost_connect=sum((inst.c(i, j) for j, i in assign.items()), Fraction(0)),
    )


def evaluate_cost(inst: Instance, sol: IntegralSolution) -> Fraction:
    """Opening cost of ``sol.open`` plus connection cost of ``sol.assign``."""
    for i in sol.open:
        if not 0 <= i < inst.n:
            raise StructuralError(f"unknown facility index {i}")
    total = Fraction(0)
    for i in sorted(sol.open):
        total += inst.f(i)
    for j, i in sol.assign.items():
        if not 0 <= j < inst.m or not 0 <= i < inst.n:
            raise StructuralError(f"unknown assignment {j} -> {i}")
        total += inst.c(i, j)
    return total


class Violation(NamedTuple):
    kind: str
    points: tuple
    detail: str


def validate_instance(inst: Instance) -> list[Violation]:
    """Every metric or bound defect of ``inst``; an empty list means valid."""
    out: list[Violation] = []
    d = inst.dist
    size = inst.n + inst.m
    if len(d) != size or any(len(row) != size for row in d):
        return [Violation("shape", (), f"distance matrix must be {size}x{size}")]
    for a in range(size):
        if d[a][a] != 0:
            out.append(Violation("diagonal", (a,), f"dist({a},{a}) = {d[a][a]}"))
        for b in range(size):
            if d[a][b] < 0:
                out.append(Violation("negative", (a, b), f"dist({a},{b}) = {d[a][b]}"))
            if b > a and d[a][b] != d[b][a]:
                out.append(Violation("asymmetric", (a, b), f"{d[a][b]} != {d[b][a]}"))
    for b in range(size):
        row_b = d[b]
        for a in range(size):
            dab = d[a][b]
            row_a = d[a]
            for c in range(a + 1, size):
                if row_a[c] > dab + row_b[c]:
                    out.append(Violation("triangle", (a, b, c), f"{row_a[c]} > {dab} + {row_b[c]}"))
    for i, fac in enumerate(inst.facilities):
        if fac.open_cost < 0:
            out.append(Violation("negative-cost", (i,), f"f = {fac.open_cost}"))
        if fac.lower_bound is not None and fac.lower_bound < 0:
            out.append(Violation("bound", (i,), "negative lower bound"))
        if fac.capacity is not None and fac.capacity <= 0:
            out.append(Violation("bound", (i,), "capacity must be positive"))
        if fac.lower_bound is not None and fac.capacity is not None and fac.lower_bound > fac.capacity:
            out.append(Violation("bound", (i,), f"lower bound {fac.lower_bound} > capacity {fac.capacity}"))
    if inst.outliers_t is not None and not 0 <= inst.outliers_t <= inst.m:
        out.append(Violation("outliers", (), f"t = {inst.outliers_t} outside [0, {inst.m}]"))
    if inst.k is not None and not 1 <= inst.k <= max(inst.n, 1):
        out.append(Violation("cardinality", (), f"k = {inst.k} outside [1, {inst.n}]"))
    return out


def uniform_bounds(inst: Instance) -> tuple[int, int]:
    """The common (B, U) of a uniform-bound instance."""
    lows = {fac.lower_bound or 0 for fac in inst.facilities}
    caps = {fac.capacity for fac in inst.facilities}
    if len(lows) != 1 or len(caps) != 1 or None in caps:
        raise StructuralError("instance does not have uniform lower bounds and capacities")
    B, U = lows.pop(), caps.pop()
    if B > U:
        raise StructuralError(f"lower bound {B} exceeds capacity {U}")
    return B, U


@dataclass(frozen=True)
class ViolationReport:
    problem: Problem
    lb_factor: Optional[object] = None
    ub_factor: Optional[object] = None
    outlier_factor: Optional[object] = None
    cardinality_excess: Optional[int] = None
    n_outliers: int = 0

    @property
    def feasible(self) -> bool:
        if self.lb_factor is not None and self.lb_factor < 1:
            return False
        if self.ub_factor is not None and self.ub_factor > 1:
            return False
        if self.outlier_factor is not None and self.outlier_factor > 1:
            return False
        if self.cardinality_excess is not None and self.cardinality_excess > 0:
            return False
        if not self.problem.has_outliers and self.n_outliers:
            return False
        return True

    def as_dict(self) -> dict:
        def fmt(v):
            if v is None:
                return None
            if v == INF:
                return "inf"
            return str(v)

        return {
            "problem": self.problem.value,
            "lb_factor": fmt(self.lb_factor),
            "ub_factor": fmt(self.ub_factor),
            "outlier_factor": fmt(self.outlier_factor),
            "cardinality_excess": self.cardinality_excess,
            "n_outliers": self.n_outliers,
            "feasible": self.feasible,
        }


def check_solution(inst: Instance, sol: IntegralSolution, problem: Problem | str) -> ViolationReport:
    problem = Problem(problem)
    evaluate_cost(inst, sol)
    served = sol.served()
    lb = ub = out = card = None
    if problem.has_lower_bounds:
        ratios = [Fraction(served[i], inst.lower(i)) for i in sol.open if inst.lower(i) > 0]
        lb = min(ratios) if ratios else INF
    if problem is Problem.LBUBFL:
        ratios = [Fraction(served[i], inst.upper(i)) for i in sol.open if inst.upper(i)]
        ub = max(ratios) if ratios else Fraction(0)
    if problem.has_outliers:
        t = inst.t
        n_out = len(sol.outliers)
        if t == 0:
            out = Fraction(0) if n_out == 0 else INF
        else:
            out = Fraction(n_out, t)
    if problem is Problem.KFLO:
        if inst.k is None:
            raise StructuralError("kflo requires k")
        card = len(sol.open) - inst.k
    return ViolationReport(problem, lb, ub, out, card, len(sol.outliers))


def discretize(inst: Instance) -> Instance:
    """Round every positive distance up to the next power of two."""
    dist = tuple(tuple(pow2_ceil(v) for v in row) for row in inst.dist)
    return inst.replace(dist=dist)


def pow2_ceil(v: Fraction) -> Fraction:
    """Smallest ``2**r`` (integer ``r``, possibly negative) with ``v <= 2**r``; zero stays zero."""
    v = Fraction(v)
    if v <= 0:
        return Fraction(0)
    r = v.numerator.bit_length() - v.denominator.bit_length()
    p = Fraction(2) ** r
    while p < v:
        p *= 2
    while p / 2 >= v:
        p /= 2
    return p


def ceil_sqrt(q: Fraction) -> int:
    """Exact ``ceil(sqrt(q))`` for a nonnegative rational."""
    p, d = q.numerator, q.denominator
    k = math.isqrt(p // d)
    while k * k * d < p:
        k += 1
    return k


def euclidean_metric(points: Sequence[tuple[Fraction, Fraction]], grid: int) -> tuple[tuple[Fraction, ...], ...]:
    """Euclidean distances rounded up to ``1/grid`` plus one grid step.

    The extra step absorbs rounding, so the result satisfies the triangle
    inequality exactly.
    """
    size = len(points)
    rows = []
    for a in range(size):
        xa, ya = points[a]
        row = []
        for b in range(size):
            if a == b:
                row.append(Fraction(0))
                continue
            xb, yb = points[b]
            sq = ((xa - xb) ** 2 + (ya - yb) ** 2) * grid * grid
            row.append(Fraction(ceil_sqrt(sq) + 1, grid))
        rows.append(row)
    for a in range(size):
        for b in range(a):
            rows[a][b] = rows[b][a]
    return tuple(tuple(r) for r in rows)


def generate_euclidean(n: int, m: int, seed: int, cost_range=(0, 1), bounds=None, *,
                       k: Optional[int] = None, t: Optional[int] = None,
                       denominator: int = 1000, grid: int = 100) -> Instance:
    """Random points in the unit square with a rational Euclidean metric.

    ``bounds`` is ``None``, a ``(lower, capacity)`` pair applied uniformly, or a
    ``(lower_range, capacity)`` pair whose first entry is a ``(lo, hi)`` range
    of integer lower bounds drawn per facility.
    """
    if n < 1 or m < 1:
        raise ValueError("need at least one facility and one client")
    rng = random.Random(seed)
    points = [
        (Fraction(rng.randint(0, denominator), denominator), Fraction(rng.randint(0, denominator), denominator))
        for _ in range(n + m)
    ]
    lo, hi = (Fraction(x) for x in cost_range)
    span = hi - lo
    costs = [lo + span * Fraction(rng.randint(0, denominator), denominator) for _ in range(n)]
    lowers: list[Optional[int]] = [None] * n
    caps: list[Optional[int]] = [None] * n
    if bounds is not None:
        lower, cap = bounds
        if isinstance(lower, tuple):
            lowers = [rng.randint(lower[0], lower[1]) for _ in range(n)]
        else:
            lowers = [lower] * n
        caps = [cap] * n
    facilities = tuple(
        Facility(f"f{i}", costs[i], lowers[i], caps[i]) for i in range(n)
    )
    clients = tuple(f"c{j}" for j in range(m))
    return Instance(facilities, clients, euclidean_metric(points, grid), k=k, outliers_t=t)
