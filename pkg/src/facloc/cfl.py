"""Capacitated facility location with splittable integer demands.

Used as a black box by the LBUBFL pipeline: exact routing for a fixed open
set, an add/drop/swap local search, and an exact subset enumeration.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Optional

from .flow import transport
from .instance import Infeasible


@dataclass(frozen=True)
class CflNode:
    id: str
    demand: int
    capacity: int
    open_cost: Fraction
    location: int  # facility index in the originating instance


@dataclass(frozen=True)
class CflInstance:
    nodes: tuple  # tuple[CflNode, ...]
    dist: tuple  # node-by-node distances

    @property
    def size(self) -> int:
        return len(self.nodes)

    def total_demand(self) -> int:
        return sum(nd.demand for nd in self.nodes)


@dataclass(frozen=True)
class CflSolution:
    open: frozenset
    flow: dict  # (demand node, facility node) -> units
    connect: Fraction
    facility: Fraction

    @property
    def cost(self) -> Fraction:
        return self.connect + self.facility

    def inflow(self, i: int) -> int:
        return sum(u for (_, b), u in self.flow.items() if b == i)

    def outflow(self, a: int) -> int:
        return sum(u for (s, _), u in self.flow.items() if s == a)


def _facility_cost(cfl: CflInstance, open_set) -> Fraction:
    return sum((cfl.nodes[i].open_cost for i in open_set), Fraction(0))


def optimal_assignment(cfl: CflInstance, open_set: Iterable[int], forced_self: bool = False) -> CflSolution:
    """Cheapest routing of all demands into ``open_set`` within capacities.

    With ``forced_self`` every open node first serves its own demand.
    Raises :class:`Infeasible`.
    """
    opened = sorted(set(open_set))
    if sum(cfl.nodes[i].capacity for i in opened) < cfl.total_demand():
        raise Infeasible("open capacity below total demand")
    supply, caps = [], []
    own = {}
    for a, nd in enumerate(cfl.nodes):
        s = nd.demand
        if forced_self and a in opened:
            own[a] = nd.demand
            s = 0
        supply.append(s)
    for i in opened:
        caps.append((0, cfl.nodes[i].capacity - own.get(i, 0)))
    cost = [[cfl.dist[a][i] for i in opened] for a in range(cfl.size)]
    res = transport(supply, caps, cost)
    flow = {(a, opened[b]): u for (a, b), u in res.flow.items()}
    for a, u in own.items():
        if u:
            flow[(a, a)] = flow.get((a, a), 0) + u
    return CflSolution(frozenset(opened), dict(sorted(flow.items())), res.cost, _facility_cost(cfl, opened))


def self_serve_normalize(cfl: CflInstance, sol: CflSolution) -> CflSolution:
    """Re-route so each open node serves all of its own demand; never costlier."""
    out = optimal_assignment(cfl, sol.open, forced_self=True)
    if out.cost > sol.cost:
        raise AssertionError(f"self-serving routing cost {out.cost} exceeds {sol.cost}")
    return out


def _try(cfl, open_set) -> Optional[CflSolution]:
    try:
        return optimal_assignment(cfl, open_set)
    except Infeasible:
        return None


def local_search_cfl(cfl: CflInstance) -> CflSolution:
    """First-improvement add/drop/swap search starting from every node open."""
    cur = optimal_assignment(cfl, range(cfl.size))
    while True:
        improved = None
        opened = sorted(cur.open)
        closed = [i for i in range(cfl.size) if i not in cur.open]
        moves = [set(cur.open) - {i} for i in opened]
        moves += [set(cur.open) | {i} for i in closed]
        moves += [(set(cur.open) - {i}) | {o} for i in opened for o in closed]
        for cand in moves:
            sol = _try(cfl, cand)
            if sol is not None and sol.cost < cur.cost:
                improved = sol
                break
        if improved is None:
            return cur
        cur = improved


def exact_cfl(cfl: CflInstance, max_nodes: int = 16) -> CflSolution:
    """Optimal CFL solution; free nodes are always open."""
    free = [i for i, nd in enumerate(cfl.nodes) if nd.open_cost == 0]
    paid = [i for i, nd in enumerate(cfl.nodes) if nd.open_cost != 0]
    if len(paid) > max_nodes:
        raise ValueError(f"{len(paid)} priced nodes exceed the exact CFL limit {max_nodes}")
    best, best_key = None, None
    for size in range(len(paid) + 1):
        for extra in combinations(paid, size):
            opened = sorted(free + list(extra))
            fc = _facility_cost(cfl, opened)
            if best is not None and fc > best.cost:
                continue
            sol = _try(cfl, opened)
            if sol is None:
                continue
            key = (sol.cost, tuple(opened))
            if best_key is None or key < best_key:
                best, best_key = sol, key
    if best is None:
        raise Infeasible("total capacity below total demand")
    return best
