"""Min-cost flow with arc lower bounds, and a transportation wrapper.

Costs are rationals; internally they are scaled to integers by the common
denominator so the shortest-path search runs on plain ints.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from .instance import Infeasible


@dataclass(frozen=True)
class Arc:
    tail: int
    head: int
    lower: int
    capacity: Optional[int]
    cost: Fraction


def _scale(costs) -> int:
    den = 1
    for c in costs:
        den = math.lcm(den, Fraction(c).denominator)
    return den


def min_cost_flow(n_nodes: int, arcs: Sequence[Arc], balance: Sequence[int]) -> tuple[list[int], Fraction]:
    """Cheapest flow meeting every node balance (positive = supply).

    Returns the flow on each arc and its total cost.  Raises
    :class:`Infeasible` when the balances cannot be met.
    """
    if sum(balance) != 0:
        raise Infeasible("balances do not sum to zero")
    den = _scale(a.cost for a in arcs)
    big = sum(abs(b) for b in balance) + sum(a.lower for a in arcs) + 1
    bal = list(balance)
    S, T = n_nodes, n_nodes + 1
    N = n_nodes + 2
    head, cap, cost, adj = [], [], [], [[] for _ in range(N)]

    def add(u, v, c, w):
        adj[u].append(len(head))
        head.append(v)
        cap.append(c)
        cost.append(w)
        adj[v].append(len(head))
        head.append(u)
        cap.append(0)
        cost.append(-w)

    base = 0
    arc_edge = []
    for a in arcs:
        w = int(Fraction(a.cost) * den)
        upper = big if a.capacity is None else a.capacity
        if upper < a.lower:
            raise Infeasible(f"arc {a.tail}->{a.head} has lower bound above capacity")
        bal[a.tail] -= a.lower
        bal[a.head] += a.lower
        base += a.lower * w
        arc_edge.append(len(head))
        add(a.tail, a.head, upper - a.lower, w)
    need = 0
    for v, b in enumerate(bal):
        if b > 0:
            add(S, v, b, 0)
            need += b
        elif b < 0:
            add(v, T, -b, 0)

    # potentials: Bellman-Ford only if some arc cost is negative
    pot = [0] * N
    if any(cost[e] < 0 for e in range(0, len(head), 2)):
        for _ in range(N):
            changed = False
            for u in range(N):
                for e in adj[u]:
                    if cap[e] > 0 and pot[u] + cost[e] < pot[head[e]]:
                        pot[head[e]] = pot[u] + cost[e]
                        changed = True
            if not changed:
                break

    sent = 0
    total = 0
    while sent < need:
        dist = [None] * N
        prev = [-1] * N
        dist[S] = 0
        heap = [(0, S)]
        while heap:
            d, u = heapq.heappop(heap)
            if d != dist[u]:
                continue
            for e in adj[u]:
                if cap[e] <= 0:
                    continue
                v = head[e]
                nd = d + cost[e] + pot[u] - pot[v]
                if dist[v] is None or nd < dist[v]:
                    dist[v] = nd
                    prev[v] = e
                    heapq.heappush(heap, (nd, v))
        if dist[T] is None:
            raise Infeasible("demands cannot be routed")
        for v in range(N):
            if dist[v] is not None:
                pot[v] += dist[v]
        push = need - sent
        v = T
        while v != S:
            e = prev[v]
            push = min(push, cap[e])
            v = head[e ^ 1]
        v = T
        while v != S:
            e = prev[v]
            cap[e] -= push
            cap[e ^ 1] += push
            total += push * cost[e]
            v = head[e ^ 1]
        sent += push
    flows = [a.lower + cap[e ^ 1] for a, e in zip(arcs, arc_edge)]
    return flows, Fraction(base + total, den)


@dataclass(frozen=True)
class Transport:
    """Result of :func:`transport`: units per (source, target) and dropped units per source."""

    flow: dict
    dropped: dict
    cost: Fraction


def transport(supply: Sequence[int], bounds: Sequence[tuple[int, Optional[int]]], cost,
              drop_capacity: int = 0) -> Transport:
    """Route every source's supply to targets whose inflow lies in ``[lo, hi]``.

    ``cost[a][b]`` is the per-unit cost of sending from source ``a`` to target
    ``b`` (``None`` forbids the pair).  Up to ``drop_capacity`` units in total
    may be left unrouted at zero cost.
    """
    A, Bn = len(supply), len(bounds)
    drop, sink = A + Bn, A + Bn + 1
    arcs = []
    pairs = []
    for a in range(A):
        if supply[a] == 0:
            continue
        for b in range(Bn):
            if cost[a][b] is not None:
                pairs.append((a, b))
                arcs.append(Arc(a, A + b, 0, supply[a], cost[a][b]))
    drops = []
    if drop_capacity > 0:
        for a in range(A):
            if supply[a]:
                drops.append(a)
                arcs.append(Arc(a, drop, 0, supply[a], Fraction(0)))
        arcs.append(Arc(drop, sink, 0, drop_capacity, Fraction(0)))
    for b, (lo, hi) in enumerate(bounds):
        arcs.append(Arc(A + b, sink, lo or 0, hi, Fraction(0)))
    balance = [0] * (sink + 1)
    for a in range(A):
        balance[a] = supply[a]
    balance[sink] = -sum(supply)
    flows, total = min_cost_flow(sink + 1, arcs, balance)
    flow = {p: f for p, f in zip(pairs, flows) if f}
    dropped = {a: f for a, f in zip(drops, flows[len(pairs):]) if f}
    return Transport(flow, dropped, total)
