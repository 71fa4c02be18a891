from fractions import Fraction as F

import pytest

from facloc.instance import (
    Facility,
    Instance,
    Problem,
    StructuralError,
    check_solution,
    discretize,
    evaluate_cost,
    generate_euclidean,
    make_solution,
    pow2_ceil,
    validate_instance,
)
from util import line_instance


def test_collinear_metric_is_valid():
    inst = line_instance([0], [1, 2], [0])
    assert validate_instance(inst) == []


def test_triangle_violation_reported_once():
    d = ((0, 1, 5), (1, 0, 1), (5, 1, 0))
    dist = tuple(tuple(F(v) for v in row) for row in d)
    inst = Instance((Facility("a", F(0)),), ("b", "c"), dist)
    bad = validate_instance(inst)
    assert [v.kind for v in bad] == ["triangle"]
    assert bad[0].points == (0, 1, 2)


def test_lower_bound_above_capacity():
    inst = line_instance([0], [1], [0], lower=4, cap=3)
    assert [v.kind for v in validate_instance(inst)] == ["bound"]


def test_asymmetric_and_range_checks():
    dist = ((F(0), F(1)), (F(2), F(0)))
    inst = Instance((Facility("a", F(0)),), ("b",), dist, k=2, outliers_t=3)
    kinds = {v.kind for v in validate_instance(inst)}
    assert {"asymmetric", "outliers", "cardinality"} <= kinds


def test_cost_direct_sum():
    inst = line_instance([0], [1, -2], [5])
    sol = make_solution(inst, [0], {0: 0, 1: 0})
    assert evaluate_cost(inst, sol) == 8 == sol.cost


def test_cost_empty():
    inst = line_instance([0], [1, 2], [5])
    sol = make_solution(inst, [], {})
    assert sol.cost == 0
    assert sol.outliers == frozenset({0, 1})


def test_cost_matches_independent_sum():
    inst = generate_euclidean(4, 6, 11)
    assign = {j: j % 2 for j in range(6)}
    sol = make_solution(inst, [0, 1], assign)
    manual = inst.f(0) + inst.f(1) + sum(inst.dist[j % 2][4 + j] for j in range(6))
    assert evaluate_cost(inst, sol) == manual


def test_removing_client_drops_its_connection_cost():
    inst = generate_euclidean(3, 5, 4)
    full = make_solution(inst, [1], {j: 1 for j in range(5)})
    part = make_solution(inst, [1], {j: 1 for j in range(4)})
    assert full.cost - part.cost == inst.c(1, 4)


def test_assignment_to_closed_facility_rejected():
    inst = line_instance([0, 3], [1], [1, 1])
    with pytest.raises(StructuralError):
        make_solution(inst, [0], {0: 1})


def test_violation_factors():
    inst = line_instance([0], [1, 2], [0], lower=4, cap=6)
    rep = check_solution(inst, make_solution(inst, [0], {0: 0, 1: 0}), Problem.LBUBFL)
    assert rep.lb_factor == F(1, 2)
    assert not rep.feasible

    inst = line_instance([0], [1] * 9, [0], lower=0, cap=3)
    rep = check_solution(inst, make_solution(inst, [0], {j: 0 for j in range(9)}), "lbubfl")
    assert rep.ub_factor == 3

    inst = line_instance([0], [1] * 5, [0], t=2)
    rep = check_solution(inst, make_solution(inst, [0], {0: 0, 1: 0}), "flo")
    assert rep.outlier_factor == F(3, 2)
    assert rep.as_dict()["outlier_factor"] == "3/2"


def test_kflo_cardinality_excess():
    inst = line_instance([0, 1, 2], [0], [0, 0, 0], k=1, t=0)
    rep = check_solution(inst, make_solution(inst, [0, 1], {0: 0}), "kflo")
    assert rep.cardinality_excess == 1


@pytest.mark.parametrize("c, expected", [(3, 4), (4, 4), (0, 0), (F(3, 8), F(1, 2)), (1, 1)])
def test_pow2_ceil(c, expected):
    assert pow2_ceil(F(c)) == expected


def test_discretize_keeps_zeros_and_rounds_up():
    inst = discretize(line_instance([0], [3, 4, 0], [0]))
    assert [inst.c(0, j) for j in range(3)] == [4, 4, 0]


def test_generator_tiny_and_deterministic():
    a = generate_euclidean(1, 1, 7)
    assert len(a.dist) == 2 and a.dist[0][1] == a.dist[1][0] > 0
    assert generate_euclidean(5, 10, 1) == generate_euclidean(5, 10, 1)
    assert validate_instance(generate_euclidean(5, 10, 1)) == []


def test_generator_bounds():
    inst = generate_euclidean(4, 6, 2, bounds=((1, 3), 5))
    assert all(1 <= f.lower_bound <= 3 and f.capacity == 5 for f in inst.facilities)


def test_restrict_facilities_keeps_client_distances():
    inst = generate_euclidean(4, 3, 9, k=3)
    sub = inst.restrict_facilities([2, 0])
    assert sub.n == 2 and sub.k == 2
    assert sub.c(0, 1) == inst.c(2, 1)
    assert sub.dist[2][4] == inst.dist[4][6]
