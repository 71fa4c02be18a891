import itertools
import random
from fractions import Fraction as F

import pytest

from facloc.cfl import (
    CflInstance,
    CflNode,
    CflSolution,
    exact_cfl,
    local_search_cfl,
    optimal_assignment,
    self_serve_normalize,
)
from facloc.instance import Infeasible


def cfl_on_line(pos, demand, capacity, cost):
    nodes = tuple(CflNode(f"n{a}", demand[a], capacity[a], F(cost[a]), a) for a in range(len(pos)))
    dist = tuple(tuple(F(abs(p - q)) for q in pos) for p in pos)
    return CflInstance(nodes, dist)


def test_self_serve_is_free():
    cfl = cfl_on_line([0], [2], [3], [1])
    sol = optimal_assignment(cfl, [0])
    assert sol.connect == 0 and sol.flow == {(0, 0): 2}


def test_capacity_shortfall():
    cfl = cfl_on_line([0, 1], [5, 0], [2, 2], [1, 1])
    with pytest.raises(Infeasible):
        optimal_assignment(cfl, [0, 1])


def brute_routing(cfl, opened):
    units = [a for a, nd in enumerate(cfl.nodes) for _ in range(nd.demand)]
    best = None
    for choice in itertools.product(opened, repeat=len(units)):
        if any(choice.count(i) > cfl.nodes[i].capacity for i in opened):
            continue
        cost = sum(cfl.dist[a][i] for a, i in zip(units, choice))
        best = cost if best is None else min(best, cost)
    return best


@pytest.mark.parametrize("seed", range(15))
def test_routing_matches_enumeration(seed):
    r = random.Random(seed)
    size = r.randint(1, 4)
    cfl = cfl_on_line([r.randint(0, 9) for _ in range(size)], [r.randint(0, 2) for _ in range(size)],
                      [r.randint(1, 3) for _ in range(size)], [r.randint(0, 4) for _ in range(size)])
    opened = sorted(r.sample(range(size), r.randint(1, size)))
    expected = brute_routing(cfl, opened)
    if expected is None:
        with pytest.raises(Infeasible):
            optimal_assignment(cfl, opened)
    else:
        assert optimal_assignment(cfl, opened).connect == expected


def test_normalize_keeps_self_serving_solution():
    cfl = cfl_on_line([0, 5], [1, 1], [2, 2], [1, 1])
    sol = optimal_assignment(cfl, [0, 1])
    assert self_serve_normalize(cfl, sol) == sol


def test_normalize_swaps_crossing_flows():
    cfl = cfl_on_line([0, 1], [1, 1], [1, 1], [0, 0])
    crossed = CflSolution(frozenset({0, 1}), {(0, 1): 1, (1, 0): 1}, F(2), F(0))
    fixed = self_serve_normalize(cfl, crossed)
    assert fixed.flow == {(0, 0): 1, (1, 1): 1}
    assert fixed.cost == 0


def test_local_search_single_node():
    cfl = cfl_on_line([0], [1], [1], [3])
    assert local_search_cfl(cfl).open == frozenset({0})


def test_local_search_prefers_free_twin():
    cfl = cfl_on_line([0, 0], [1, 0], [2, 2], [0, 4])
    assert local_search_cfl(cfl).open == frozenset({0})


@pytest.mark.parametrize("seed", range(10))
def test_exact_never_worse_than_local(seed):
    r = random.Random(seed)
    size = r.randint(2, 6)
    cfl = cfl_on_line([r.randint(0, 20) for _ in range(size)], [r.randint(0, 3) for _ in range(size)],
                      [3] * size, [r.randint(0, 6) for _ in range(size)])
    exact, local = exact_cfl(cfl), local_search_cfl(cfl)
    assert exact.cost <= local.cost
    assert sum(exact.flow.values()) == cfl.total_demand()
