from fractions import Fraction as F

import pytest

from facloc.instance import make_solution
from facloc.lbflo import (
    FractionalSolution,
    close_and_reassign,
    filter_cluster_open,
    reduce_to_flo,
    solve_lbflo,
    solve_lbflo_lp,
)
from facloc.rounding import solve_flo
from util import lbflo_case, line_instance


def test_inflated_cost_substitution():
    inst = line_instance([0], [1, -2, 7], [5], lower=2, t=0)
    prime, params = reduce_to_flo(inst, F(1, 2))
    assert params.delta == 2
    assert params.nearest[0] == (0, 1)
    assert prime.f(0) == 11
    assert prime.lower(0) == 0


def test_zero_lower_bound_keeps_cost():
    inst = line_instance([0], [1], [5], lower=0, t=0)
    prime, _ = reduce_to_flo(inst)
    assert prime.f(0) == 5


def test_alpha_range():
    inst = line_instance([0], [1], [5], lower=1, t=0)
    with pytest.raises(ValueError):
        reduce_to_flo(inst, 1)


def test_nothing_to_close():
    inst = line_instance([0, 10], [1, 2, 9, 11], [1, 1], lower=2, t=0)
    _, params = reduce_to_flo(inst)
    as_prime = make_solution(inst, [0, 1], {0: 0, 1: 0, 2: 1, 3: 1})
    sol, closures = close_and_reassign(inst, params, as_prime)
    assert sol == as_prime and closures == []


def test_proportional_split_rounds_reassigned_share_up():
    # f0 serves c0, c1 (< 3/5 * 4); its other nearest clients: c2 served by f1, c3 an outlier
    inst = line_instance([0, 10], [1, 1, 2, 3, 10, 10, 10], [1, 1], lower=[4, 0], t=1)
    _, params = reduce_to_flo(inst, F(3, 5))
    as_prime = make_solution(inst, [0, 1], {0: 0, 1: 0, 2: 1, 4: 1, 5: 1, 6: 1})
    sol, closures = close_and_reassign(inst, params, as_prime)
    (cl,) = closures
    assert cl.served_elsewhere_near == (2,) and cl.outliers_near == (3,)
    assert len(cl.reassigned) == 1 and len(cl.dropped) == 1
    assert sol.open == frozenset({1})
    assert len(sol.assign) + len(sol.outliers) == inst.m


def test_no_served_neighbour_drops_everyone():
    inst = line_instance([0, 10], [1, 2, 3, 10], [1, 1], lower=[3, 0], t=2)
    _, params = reduce_to_flo(inst)
    as_prime = make_solution(inst, [0, 1], {0: 0, 3: 1})
    sol, closures = close_and_reassign(inst, params, as_prime)
    assert closures[0].target is None and closures[0].dropped == (0,)
    assert sol.outliers == frozenset({0, 1, 2})


def test_no_bounds_is_plain_facility_location():
    inst = line_instance([0, 6], [1, 2, 5, 7], [2, 3], lower=0, t=0)
    res = solve_lbflo(inst)
    assert res.solution.cost == solve_flo(inst).cost
    assert res.closures == []


@pytest.mark.parametrize("seed", range(10))
def test_every_open_facility_meets_half_its_bound(seed):
    inst = lbflo_case(seed)
    res = solve_lbflo(inst)
    served = res.solution.served()
    assert all(served[i] >= F(1, 2) * inst.lower(i) for i in res.solution.open)
    assert len(res.solution.assign) + len(res.solution.outliers) == inst.m


def test_unfiltered_when_no_outlier_mass():
    inst = line_instance([0, 5], [1, 4], [1, 1], lower=1, t=0)
    res = filter_cluster_open(inst, 2)
    assert res.filtered == []


def test_cheapest_facility_of_a_cluster_opens():
    inst = line_instance([0, 0, 0], [1], [3, 5, 7], lower=0, t=0)
    third = F(1, 3)
    lp = FractionalSolution({(0, 0): third, (1, 0): third, (2, 0): third}, [third] * 3, [F(0)])
    res = filter_cluster_open(inst, 2, lp=lp)
    assert res.representatives == [0]
    assert res.opened == {0: 0}
    assert res.rounded.y == [1, 0, 0]
    assert res.rounded.x == {(0, 0): 1}


def test_lambda_must_exceed_one():
    inst = line_instance([0], [1], [1], lower=0, t=0)
    with pytest.raises(ValueError):
        filter_cluster_open(inst, 1)


@pytest.mark.parametrize("seed", range(10))
def test_filtering_is_bounded_by_lambda_t(seed):
    inst = lbflo_case(seed)
    res = filter_cluster_open(inst, 2)
    assert len(res.filtered) <= 2 * inst.t
    assert set(res.rounded.y) <= {0, 1}
    assert sum(res.lp.z) <= inst.t


def test_lp_value_is_a_lower_bound():
    from facloc.oracle import exact_solve

    inst = lbflo_case(4)
    lp = solve_lbflo_lp(inst)
    assert lp.cost(inst) <= exact_solve(inst, "lbflo").cost


def open_everything(prime):
    from facloc.oracle import greedy_outlier_assignment

    every = range(prime.n)
    return make_solution(prime, every, greedy_outlier_assignment(prime, every, prime.m - prime.t))


@pytest.mark.parametrize("seed", range(15))
def test_closures_after_a_wasteful_flo_solution(seed):
    inst = lbflo_case(seed)
    res = solve_lbflo(inst, flo_solver=open_everything)
    sol = res.solution
    served = sol.served()
    assert all(served[i] >= F(1, 2) * inst.lower(i) for i in sol.open)
    assert len(sol.assign) + len(sol.outliers) == inst.m
    closed = {c.facility for c in res.closures}
    assert closed == {i for i, s in res.flo_solution.served().items() if s < F(1, 2) * inst.lower(i)}
    assert not closed & sol.open
