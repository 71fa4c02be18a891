"""Shared builders for tests."""

import random
from fractions import Fraction as F

from facloc.instance import Facility, Instance, generate_euclidean


def line_instance(fac_pos, cli_pos, costs, lower=None, cap=None, k=None, t=None):
    """Points on a line; distances are absolute differences."""
    pos = [F(p) for p in list(fac_pos) + list(cli_pos)]
    dist = tuple(tuple(abs(a - b) for b in pos) for a in pos)
    n = len(fac_pos)
    lowers = lower if isinstance(lower, (list, tuple)) else [lower] * n
    facs = tuple(Facility(f"f{i}", F(costs[i]), lowers[i], cap) for i in range(n))
    clients = tuple(f"c{j}" for j in range(len(cli_pos)))
    return Instance(facs, clients, dist, k=k, outliers_t=t)


def kflo_case(seed):
    """Random kFLO instance with n <= 8, m <= 12, k <= 4, t <= 3."""
    r = random.Random(seed)
    n, m = r.randint(2, 8), r.randint(2, 12)
    k = r.randint(1, min(4, n))
    t = r.randint(0, min(3, m - 1))
    cost = r.choice([(0, 1), (0, 3), (1, 2), (0, F(1, 4))])
    return generate_euclidean(n, m, 1000 + seed, cost, k=k, t=t)


def flo_case(seed):
    r = random.Random(seed)
    n, m = r.randint(1, 8), r.randint(2, 12)
    t = r.randint(0, min(3, m - 1))
    cost = r.choice([(0, 1), (0, 3), (1, 2)])
    return generate_euclidean(n, m, 2000 + seed, cost, t=t)


def lbflo_case(seed):
    """Random LBFLO instance with lower bounds at most 3."""
    r = random.Random(seed)
    n, m = r.randint(2, 6), r.randint(4, 10)
    t = r.randint(0, 2)
    cost = r.choice([(0, 1), (0, 3), (1, 2)])
    return generate_euclidean(n, m, 3000 + seed, cost, ((1, 3), None), t=t)


def lbubfl_case(seed):
    """Random uniform-bound instance with |F| <= 6, m <= 14, B <= 3, U >= B and U*n >= m."""
    r = random.Random(seed)
    n, m = r.randint(2, 6), r.randint(3, 14)
    B = r.randint(1, 3)
    U = max(r.randint(B, B + 3), -(-m // n))
    cost = r.choice([(0, 1), (0, 3), (0, F(1, 10))])
    return generate_euclidean(n, m, 4000 + seed, cost, (B, U))
