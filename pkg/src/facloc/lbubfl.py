"""Uniform lower and upper bounds (LBUBFL).

Pipeline: a tri-criteria start S^t -> capacitated instance built around the
facilities of S^t -> CFL solve -> three rounds of client moves that remove
every lower-bound violation at the price of at most ``(beta + 1) U`` load.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .cfl import CflInstance, CflNode, CflSolution, exact_cfl, local_search_cfl, self_serve_normalize
from .flow import transport
from .instance import (
    Facility,
    Infeasible,
    Instance,
    IntegralSolution,
    Problem,
    ViolationReport,
    check_solution,
    make_solution,
    uniform_bounds,
)
from .lbflo import filter_cluster_open, solve_lbflo_lp

log = logging.getLogger(__name__)

BETA = 2


class PipelineError(Exception):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


def alpha_of(ell) -> Fraction:
    ell = Fraction(ell)
    if ell <= 2:
        raise ValueError("ell must exceed 2 so that 2*alpha - 1 > 0")
    return (ell - 1) / ell


def delta_of(alpha: Fraction) -> Fraction:
    return (2 * alpha - 1) / (6 * alpha * alpha)


def connection_factor(alpha: Fraction) -> Fraction:
    return 6 * alpha / (2 * alpha - 1)


@dataclass(frozen=True)
class TriCriteriaSolution:
    open: tuple  # F^t, sorted facility indices
    sigma: dict  # client -> facility in F^t
    counts: dict  # facility -> n_i
    alpha: Fraction
    beta: int
    ell: Fraction
    cost: Fraction

    def clients_of(self, i: int) -> list:
        return sorted(j for j, a in self.sigma.items() if a == i)


def check_tricriteria(inst: Instance, st: TriCriteriaSolution) -> list:
    """Contract violations of ``st`` (empty when valid)."""
    B, U = uniform_bounds(inst)
    problems = []
    if sorted(st.sigma) != list(range(inst.m)):
        problems.append("not every client is assigned")
    for i in st.open:
        n = st.counts.get(i, 0)
        if n < st.alpha * B:
            problems.append(f"facility {i} serves {n} < alpha*B")
        if n > st.beta * U:
            problems.append(f"facility {i} serves {n} > beta*U")
    if set(st.sigma.values()) - set(st.open):
        problems.append("assignment to a facility outside F^t")
    return problems


def make_tricriteria(inst: Instance, open_, sigma: dict, ell=3) -> TriCriteriaSolution:
    sol = make_solution(inst, open_, sigma)
    counts = {i: 0 for i in sol.open}
    for i in sigma.values():
        counts[i] += 1
    return TriCriteriaSolution(tuple(sorted(sol.open)), dict(sorted(sigma.items())), counts,
                               alpha_of(ell), BETA, Fraction(ell), sol.cost)


def _bounded_assignment(inst: Instance, opened: list, lo: int, hi: int):
    cost = [[inst.c(i, j) for i in opened] for j in range(inst.m)]
    res = transport([1] * inst.m, [(lo, hi)] * len(opened), cost)
    return {j: opened[b] for (j, b) in res.flow}


def tricriteria_st(inst: Instance, ell=3, lam=None) -> TriCriteriaSolution:
    """Filter/cluster the lower-bounded LP, then assign with loads in ``[ceil(alpha B), 2U]``.

    The open set from clustering is shrunk (fewest LP-assigned clients
    first) or grown (cheapest first) until such an assignment exists.  The
    separation parameter ``lam`` defaults to ``ell``.
    """
    alpha = alpha_of(ell)
    B, U = uniform_bounds(inst)
    if inst.m < B:
        raise Infeasible(f"{inst.m} clients cannot meet lower bound {B}")
    lo, hi = math.ceil(alpha * B), BETA * U
    if inst.m > hi * inst.n:
        raise Infeasible("too many clients for twice the total capacity")
    fr = filter_cluster_open(inst, Fraction(ell if lam is None else lam), lp=solve_lbflo_lp(inst, with_outliers=False))
    opened = sorted(set(fr.opened.values()))
    mass = {i: Fraction(0) for i in range(inst.n)}
    for (i, _), v in fr.rounded.x.items():
        mass[i] += v
    if not opened:
        opened = [min(range(inst.n), key=lambda i: (inst.f(i), i))]
    while lo * len(opened) > inst.m:
        drop = min(opened, key=lambda i: (mass[i], -i))
        opened.remove(drop)
    while hi * len(opened) < inst.m:
        add = min((i for i in range(inst.n) if i not in opened), key=lambda i: (inst.f(i), i))
        opened = sorted(opened + [add])
    sigma = _bounded_assignment(inst, opened, lo, hi)
    used = sorted(set(sigma.values()))
    return make_tricriteria(inst, used, sigma, ell)


def relocated_metric(inst: Instance, st: TriCriteriaSolution) -> tuple:
    """Distance matrix with every client moved onto its S^t facility."""
    pts = list(range(inst.n)) + [st.sigma[j] for j in range(inst.m)]
    return tuple(tuple(inst.dist[a][b] for b in pts) for a in pts)


def build_i1(inst: Instance, st: TriCriteriaSolution) -> Instance:
    """Clients moved to their S^t facility; facilities of S^t become free."""
    ft = set(st.open)
    facs = tuple(
        Facility(f.id, Fraction(0) if i in ft else f.open_cost, f.lower_bound, f.capacity)
        for i, f in enumerate(inst.facilities)
    )
    return Instance(facs, inst.clients, relocated_metric(inst, st), k=None, outliers_t=None)


def build_i2(inst: Instance, st: TriCriteriaSolution) -> Instance:
    """Lower-bounded instance on F^t only: free facilities, no capacities."""
    i1 = build_i1(inst, st).restrict_facilities(list(st.open))
    facs = tuple(Facility(f.id, Fraction(0), f.lower_bound, None) for f in i1.facilities)
    return i1.replace(facilities=facs)


def nearest_other(inst: Instance, i: int, pool) -> Optional[int]:
    """Nearest facility of ``pool`` other than ``i``; ties by the edge (distance, min id, max id)."""
    others = [o for o in pool if o != i]
    if not others:
        return None
    return min(others, key=lambda o: (inst.dist[i][o], min(i, o), max(i, o)))


@dataclass
class CapReduction:
    ft: tuple
    counts: dict
    B: int
    l: dict  # facility -> distance to nearest other facility of F^t
    eta: dict  # facility -> that neighbour
    delta: Fraction
    cfl: CflInstance
    nodes_of: dict  # facility -> list of node indices (small: [i]; big: [i1, i2])
    kind: list  # per node: "small", "big1", "big2"

    def is_small(self, i: int) -> bool:
        return len(self.nodes_of[i]) == 1


def build_icap(inst: Instance, st: TriCriteriaSolution) -> CapReduction:
    B, _ = uniform_bounds(inst)
    ft = list(st.open)
    if len(ft) < 2:
        raise ValueError("the capacitated reduction needs at least two facilities in F^t")
    delta = delta_of(st.alpha)
    eta = {i: nearest_other(inst, i, ft) for i in ft}
    ell = {i: inst.dist[i][eta[i]] for i in ft}
    nodes, kind, nodes_of = [], [], {}
    for i in ft:
        n = st.counts[i]
        fid = inst.facilities[i].id
        if n <= B:
            nodes_of[i] = [len(nodes)]
            nodes.append(CflNode(fid, B - n, B, delta * n * ell[i], i))
            kind.append("small")
        else:
            nodes_of[i] = [len(nodes), len(nodes) + 1]
            nodes.append(CflNode(f"{fid}#1", 0, B, delta * B * ell[i], i))
            nodes.append(CflNode(f"{fid}#2", 0, n - B, Fraction(0), i))
            kind += ["big1", "big2"]
    dist = tuple(tuple(inst.dist[a.location][b.location] for b in nodes) for a in nodes)
    for nd in nodes:
        assert nd.demand <= nd.capacity
    return CapReduction(tuple(ft), dict(st.counts), B, ell, eta, delta, CflInstance(tuple(nodes), dist),
                        nodes_of, kind)


@dataclass
class Type1Result:
    holdings: dict  # facility -> clients held after type-1 moves
    moves: list  # (client, from facility, to facility)
    outflow: dict
    pi: dict


def lift_type1(st: TriCriteriaSolution, red: CapReduction, as_cap: CflSolution) -> Type1Result:
    """Each unit of a small facility's demand served at another facility pulls one client from it."""
    holdings = {i: st.clients_of(i) for i in red.ft}
    pools = {i: list(holdings[i]) for i in red.ft}
    owner = {nd: i for i, nds in red.nodes_of.items() for nd in nds}
    moves, outflow = [], {i: 0 for i in red.ft}
    for (a, b), units in sorted(as_cap.flow.items()):
        src, dst = owner[a], owner[b]
        if src == dst:
            continue
        if not red.is_small(src):
            raise AssertionError("only small facilities carry demand")
        for _ in range(units):
            if not pools[dst]:
                raise AssertionError(f"facility {dst} gives away more than its {red.counts[dst]} clients")
            j = pools[dst].pop(0)
            holdings[dst].remove(j)
            holdings[src].append(j)
            moves.append((j, dst, src))
            outflow[dst] += 1
    for i in red.ft:
        holdings[i].sort()
        if outflow[i] > red.counts[i]:
            raise AssertionError(f"facility {i} gave away more clients than it had")
        if len(holdings[i]) > max(red.B, red.counts[i]):
            raise AssertionError(f"facility {i} overloaded after swaps: {len(holdings[i])} > max(B, n_i)")
    return Type1Result(holdings, moves, outflow, {i: len(h) for i, h in holdings.items()})


@dataclass
class FacilityForest:
    P: list
    Pbar: list
    eta: dict
    psi: dict  # node -> parent after binarization (absent for roots)
    children: dict  # node -> in-neighbours after binarization
    roots: list  # ("P", i) or ("pair", i1, i2)
    weight: dict  # node -> 3 * c(node, eta(node))


def build_binary_forest(inst: Instance, st: TriCriteriaSolution, pi: dict, B: int) -> FacilityForest:
    ft = list(st.open)
    P = sorted(i for i in ft if pi[i] >= B)
    Pbar = sorted(i for i in ft if pi[i] < B)
    eta = {i: nearest_other(inst, i, ft) for i in Pbar}
    pairs = sorted({tuple(sorted((i, eta[i]))) for i in Pbar if eta[i] in eta and eta[eta[i]] == i})
    in_pair = {i: p for p in pairs for i in p}
    # group children by their tree parent; a root pair counts as one node
    groups: dict = {}
    for y in Pbar:
        if y in in_pair and in_pair[y] == tuple(sorted((y, eta[y]))):
            continue
        x = eta[y]
        key = in_pair.get(x, x)
        groups.setdefault(key, []).append(y)
    psi, children = {}, {}
    for key, kids in groups.items():
        kids.sort(key=lambda y: (inst.dist[y][eta[y]], y))
        for pos, y in enumerate(kids):
            parent = eta[y] if pos == 0 else kids[pos - 1]
            psi[y] = parent
            children.setdefault(parent, []).append(y)
            if inst.dist[y][parent] > 3 * inst.dist[y][eta[y]]:
                raise AssertionError(f"binarized edge {y}->{parent} longer than three nearest-neighbour steps")
    roots = [("P", i) for i in P if i in children] + [("pair",) + p for p in pairs]
    for node, kids in children.items():
        limit = 1 if node in P or node in in_pair else 2
        if node in in_pair:
            kids_total = sum(len(children.get(m, [])) for m in in_pair[node])
            if kids_total > 1:
                raise AssertionError(f"root pair {in_pair[node]} has in-degree {kids_total}")
        elif len(kids) > limit:
            raise AssertionError(f"node {node} has in-degree {len(kids)}")
    weight = {y: 3 * inst.dist[y][eta[y]] for y in Pbar}
    return FacilityForest(P, Pbar, eta, psi, children, sorted(roots), weight)


@dataclass
class TreeResult:
    holdings: dict  # facility -> clients held
    opened: list
    pushes: list  # (from, to, count)
    shipments: list  # (pair, target, count)
    load_notes: list = field(default_factory=list)


def process_trees(inst: Instance, forest: FacilityForest, holdings: dict, B: int, U: int) -> TreeResult:
    """Type-2 bottom-up pushes, then type-3 resolution of root pairs."""
    hold = {i: list(c) for i, c in holdings.items()}
    opened = list(forest.P)
    pushes, shipments, notes = [], [], []
    in_pair = {i for r in forest.roots if r[0] == "pair" for i in r[1:]}

    def visit(node):
        for y in forest.children.get(node, []):
            visit(y)
        if node in forest.P or node in in_pair:
            return
        if len(hold[node]) >= B:
            if len(hold[node]) >= 3 * B:
                raise AssertionError(f"tree node {node} collected {len(hold[node])} >= 3B clients")
            opened.append(node)
            return
        parent = forest.psi[node]
        moving = hold[node]
        hold[node] = []
        hold[parent].extend(moving)
        pushes.append((node, parent, len(moving)))

    for root in forest.roots:
        for member in root[1:]:
            visit(member)
    for root in forest.roots:
        if root[0] != "pair":
            continue
        a, b = root[1], root[2]
        total = len(hold[a]) + len(hold[b])
        if total >= B:
            keep, give = (a, b) if (len(hold[a]), -a) >= (len(hold[b]), -b) else (b, a)
            hold[keep].extend(hold[give])
            hold[give] = []
            if len(hold[keep]) >= 3 * B:
                raise AssertionError(f"root pair absorber {keep} holds {len(hold[keep])} >= 3B")
            opened.append(keep)
            continue
        if not forest.P:
            raise PipelineError("type3", "root pair below B with no facility already serving B clients")

        def dist_to(p):
            return min(inst.dist[p][a], inst.dist[p][b])

        ranked = sorted(forest.P, key=lambda p: (dist_to(p), p))
        target = next((p for p in ranked if len(hold[p]) + total <= (BETA + 1) * U), ranked[0])
        if target != ranked[0]:
            notes.append(f"pair {a},{b} shipped to {target} instead of nearest {ranked[0]} to respect capacity")
        hold[target].extend(hold[a] + hold[b])
        hold[a], hold[b] = [], []
        shipments.append(((a, b), target, total))
    for p in forest.P:
        if len(hold[p]) > BETA * U + B:
            notes.append(f"facility {p} holds {len(hold[p])} > beta*U + B")
    for i in opened:
        if len(hold[i]) < B:
            raise AssertionError(f"opened facility {i} holds only {len(hold[i])} < B clients")
    for i, c in hold.items():
        c.sort()
    return TreeResult(hold, sorted(opened), pushes, shipments, notes)


def lift_to_original(inst: Instance, st: TriCriteriaSolution, holdings: dict, opened) -> tuple[IntegralSolution, Fraction]:
    """Open the chosen facilities at their true cost; returns S and Cost_{I1}(S1)."""
    assign = {}
    for i in opened:
        for j in holdings[i]:
            assign[j] = i
    if len(assign) != inst.m:
        raise AssertionError("client conservation violated")
    sol = make_solution(inst, opened, assign)
    cost_i1 = sum((inst.dist[st.sigma[j]][i] for j, i in assign.items()), Fraction(0))
    cost_i1 += sum((inst.f(i) for i in opened if i not in st.open), Fraction(0))
    if sol.cost > st.cost + cost_i1:
        raise AssertionError(f"lifted cost {sol.cost} exceeds Cost(S^t) + Cost_I1(S1) = {st.cost + cost_i1}")
    return sol, cost_i1


EXACT_CFL_LIMIT = 12


def solve_cfl(cfl: CflInstance, solver: str = "auto") -> CflSolution:
    priced = sum(1 for nd in cfl.nodes if nd.open_cost != 0)
    if solver == "exact" or (solver == "auto" and priced <= EXACT_CFL_LIMIT):
        return exact_cfl(cfl, max_nodes=max(priced, EXACT_CFL_LIMIT))
    if solver in ("local", "auto"):
        return local_search_cfl(cfl)
    raise ValueError(f"unknown CFL solver {solver!r}")


@dataclass
class LbubflResult:
    solution: IntegralSolution
    report: ViolationReport
    st: TriCriteriaSolution
    alpha: Fraction
    delta: Fraction
    connection_factor: Fraction
    trace: list = field(default_factory=list)
    reduction: Optional[CapReduction] = None
    as_cap: Optional[CflSolution] = None
    forest: Optional[FacilityForest] = None


def _stage(trace, name, **values):
    trace.append({"stage": name, **{k: (str(v) if isinstance(v, Fraction) else v) for k, v in values.items()}})


def solve_lbubfl(inst: Instance, ell=3, cfl_solver: str = "auto", st: Optional[TriCriteriaSolution] = None,
                 lam=None) -> LbubflResult:
    B, U = uniform_bounds(inst)
    alpha = alpha_of(ell)
    trace: list = []
    if st is None:
        try:
            st = tricriteria_st(inst, ell, lam)
        except Infeasible as e:
            raise PipelineError("tricriteria", str(e)) from e
    bad = check_tricriteria(inst, st)
    if bad:
        raise PipelineError("tricriteria", "; ".join(bad))
    _stage(trace, "tricriteria", cost=st.cost, open=len(st.open))
    result = LbubflResult(None, None, st, alpha, delta_of(alpha), connection_factor(alpha), trace)
    if B == 0 or len(st.open) == 1:
        if any(n < B for n in st.counts.values()):
            raise PipelineError("bypass", "single facility below the lower bound")
        sol = make_solution(inst, st.open, st.sigma)
        _stage(trace, "bypass", cost=sol.cost)
    else:
        red = build_icap(inst, st)
        _stage(trace, "icap", nodes=red.cfl.size, demand=red.cfl.total_demand(), delta=red.delta)
        as_cap = self_serve_normalize(red.cfl, solve_cfl(red.cfl, cfl_solver))
        _stage(trace, "cfl", cost=as_cap.cost, open=len(as_cap.open))
        t1 = lift_type1(st, red, as_cap)
        _stage(trace, "type1", moves=len(t1.moves))
        forest = build_binary_forest(inst, st, t1.pi, B)
        tr = process_trees(inst, forest, t1.holdings, B, U)
        for note in tr.load_notes:
            log.warning(note)
        _stage(trace, "trees", opened=len(tr.opened), pushes=len(tr.pushes), shipments=len(tr.shipments))
        sol, cost_i1 = lift_to_original(inst, st, tr.holdings, tr.opened)
        _stage(trace, "lift", cost=sol.cost, cost_i1=cost_i1)
        result.reduction, result.as_cap, result.forest = red, as_cap, forest
    result.solution = sol
    result.report = check_solution(inst, sol, Problem.LBUBFL)
    return result
