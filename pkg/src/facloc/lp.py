"""Exact bounded-variable simplex and the LP relaxations built on it.

Every number in the pivot path is an exact rational.  When gmpy2 is
available its ``mpq`` type is used internally for speed; inputs and outputs
are always :class:`fractions.Fraction`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .instance import Instance, StructuralError

try:
    from gmpy2 import mpq as _Q
except ImportError:  # pragma: no cover
    _Q = Fraction

LE, GE, EQ = "<=", ">=", "=="

# Dantzig pricing is used until this many consecutive degenerate pivots,
# after which Bland's rule takes over until the objective moves again.
DEGENERATE_STREAK = 25


class InfeasibleLP(Exception):
    pass


class UnboundedLP(Exception):
    pass


@dataclass
class LinearProgram:
    """min ``objective . x + constant`` over boxes ``[0, upper]`` and linear rows."""

    names: list = field(default_factory=list)
    upper: list = field(default_factory=list)
    objective: list = field(default_factory=list)
    rows: list = field(default_factory=list)  # (coeffs {var index: coef}, sense, rhs, label)
    constant: Fraction = Fraction(0)
    index: dict = field(default_factory=dict)

    def add_var(self, name, cost=0, upper=1) -> int:
        if name in self.index:
            raise StructuralError(f"duplicate variable {name!r}")
        self.index[name] = len(self.names)
        self.names.append(name)
        self.upper.append(None if upper is None else Fraction(upper))
        self.objective.append(Fraction(cost))
        return self.index[name]

    def add_row(self, coeffs: dict, sense: str, rhs, label=None) -> int:
        if sense not in (LE, GE, EQ):
            raise StructuralError(f"bad sense {sense!r}")
        row = {}
        for name, coef in coeffs.items():
            if name not in self.index:
                raise StructuralError(f"row references undeclared variable {name!r}")
            coef = Fraction(coef)
            if coef:
                k = self.index[name]
                row[k] = row.get(k, Fraction(0)) + coef
        self.rows.append((row, sense, Fraction(rhs), label))
        return len(self.rows) - 1

    @property
    def n_vars(self) -> int:
        return len(self.names)

    def value_of(self, x: dict) -> Fraction:
        return self.constant + sum((self.objective[k] * x[name] for k, name in enumerate(self.names)), Fraction(0))

    def is_feasible(self, x: dict) -> bool:
        """Independent exact feasibility check of a point given by name."""
        for k, name in enumerate(self.names):
            v = x[name]
            if v < 0 or (self.upper[k] is not None and v > self.upper[k]):
                return False
        for coeffs, sense, rhs, _ in self.rows:
            lhs = sum((c * x[self.names[k]] for k, c in coeffs.items()), Fraction(0))
            if sense == LE and lhs > rhs or sense == GE and lhs < rhs or sense == EQ and lhs != rhs:
                return False
        return True

    def tight_constraints(self, x: dict) -> list:
        """Every bound or row satisfied with equality at ``x``."""
        tight = []
        for k, name in enumerate(self.names):
            if x[name] == 0:
                tight.append(("lower", k))
            elif self.upper[k] is not None and x[name] == self.upper[k]:
                tight.append(("upper", k))
        for r, (coeffs, _, rhs, _) in enumerate(self.rows):
            if sum((c * x[self.names[k]] for k, c in coeffs.items()), Fraction(0)) == rhs:
                tight.append(("row", r))
        return tight

    def constraint_vector(self, tight) -> dict:
        kind, k = tight
        if kind in ("lower", "upper"):
            return {k: Fraction(1)}
        return dict(self.rows[k][0])

    def to_lp_format(self) -> str:
        """CPLEX-LP style dump for debugging."""

        def expr(coeffs):
            parts = [f"{'+' if c >= 0 else '-'} {abs(c)} {self.names[k]}" for k, c in sorted(coeffs.items())]
            return " ".join(parts) if parts else "0"

        obj = {k: c for k, c in enumerate(self.objective) if c}
        lines = ["Minimize", f" obj: {expr(obj)}", "Subject To"]
        for r, (coeffs, sense, rhs, label) in enumerate(self.rows):
            lines.append(f" {label or f'r{r}'}: {expr(coeffs)} {sense.replace('==', '=')} {rhs}")
        lines.append("Bounds")
        for k, name in enumerate(self.names):
            ub = "+inf" if self.upper[k] is None else self.upper[k]
            lines.append(f" 0 <= {name} <= {ub}")
        lines.append("End")
        return "\n".join(lines)


@dataclass(frozen=True)
class VertexSolution:
    values: dict
    objective: Fraction
    tight: tuple
    pivots: int = 0

    def __getitem__(self, name):
        return self.values[name]


def rank(vectors: list, n: int) -> int:
    """Exact rank of sparse rational row vectors over ``n`` columns."""
    rows = [dict(v) for v in vectors if v]
    r = 0
    for col in range(n):
        piv = next((i for i in range(r, len(rows)) if rows[i].get(col)), None)
        if piv is None:
            continue
        rows[r], rows[piv] = rows[piv], rows[r]
        p = rows[r]
        a = p[col]
        for i in range(r + 1, len(rows)):
            g = rows[i].get(col)
            if g:
                f = g / a
                row = rows[i]
                for kk, v in p.items():
                    nv = row.get(kk, 0) - f * v
                    if nv:
                        row[kk] = nv
                    else:
                        row.pop(kk, None)
        r += 1
    return r


class _Tableau:
    """Row form ``x_B(r) + sum_k T[r][k] x_k = const`` with explicit variable values."""

    def __init__(self, lower_upper, basis, rows, values):
        self.ub = lower_upper
        self.basis = basis
        self.T = rows
        self.x = values
        self.d = {}
        self.pivots = 0

    def price(self, cost):
        d = {}
        basic = set(self.basis)
        for k, c in enumerate(cost):
            if c and k not in basic:
                d[k] = d.get(k, 0) + c
        for r, b in enumerate(self.basis):
            cb = cost[b]
            if cb:
                for k, a in self.T[r].items():
                    d[k] = d.get(k, 0) - cb * a
        self.d = {k: v for k, v in d.items() if v}

    def eligible(self, k, dk) -> bool:
        ub = self.ub[k]
        if ub == 0:
            return False
        if dk < 0:
            return ub is None or self.x[k] < ub
        return self.x[k] > 0

    def run(self, cost, bland_only=False):
        self.price(cost)
        streak = 0
        while True:
            use_bland = bland_only or streak >= DEGENERATE_STREAK
            enter = None
            best = None
            for k in sorted(self.d) if use_bland else self.d:
                dk = self.d[k]
                if not self.eligible(k, dk):
                    continue
                if use_bland:
                    enter = k
                    break
                mag = abs(dk)
                if best is None or mag > best or (mag == best and k < enter):
                    best, enter = mag, k
            if enter is None:
                return
            theta = self.step(enter)
            streak = streak + 1 if theta == 0 else 0

    def step(self, e):
        direction = -1 if self.d[e] > 0 else 1
        limit = None
        leave = None  # row index, or -1 for a bound flip
        if self.ub[e] is not None:
            limit, leave = self.ub[e], -1
            leave_var = e
        for r, row in enumerate(self.T):
            g = row.get(e)
            if not g:
                continue
            b = self.basis[r]
            rate = -g * direction
            if rate < 0:
                cap = self.x[b] / (-rate)
            elif self.ub[b] is not None:
                cap = (self.ub[b] - self.x[b]) / rate
            else:
                continue
            if limit is None or cap < limit or (cap == limit and b < leave_var):
                limit, leave, leave_var = cap, r, b
        if limit is None:
            raise UnboundedLP("objective unbounded below")
        if limit:
            delta = limit * direction
            self.x[e] += delta
            for r, row in enumerate(self.T):
                g = row.get(e)
                if g:
                    self.x[self.basis[r]] -= g * delta
        if leave == -1:
            return limit
        self.pivot(leave, e)
        return limit

    def pivot(self, r, e):
        row = self.T[r]
        a = row.pop(e)
        b = self.basis[r]
        new = {k: v / a for k, v in row.items()}
        new[b] = 1 / a
        self.T[r] = new
        self.basis[r] = e
        for i, other in enumerate(self.T):
            if i == r:
                continue
            g = other.pop(e, None)
            if g:
                for k, v in new.items():
                    nv = other.get(k, 0) - g * v
                    if nv:
                        other[k] = nv
                    else:
                        other.pop(k, None)
        de = self.d.pop(e, None)
        if de:
            for k, v in new.items():
                nv = self.d.get(k, 0) - de * v
                if nv:
                    self.d[k] = nv
                else:
                    self.d.pop(k, None)
        self.pivots += 1


def solve_extreme(lp: LinearProgram, bland_only: bool = False) -> VertexSolution:
    """Optimal basic feasible solution of ``lp``.

    Raises :class:`InfeasibleLP` or :class:`UnboundedLP`.
    """
    n = lp.n_vars
    R = len(lp.rows)
    ub = [None if u is None else _Q(u) for u in lp.upper]
    rows, basis, values = [], [], [_Q(0)] * n
    art_rows = []
    for r, (coeffs, sense, rhs, _) in enumerate(lp.rows):
        sign = -1 if sense == GE else 1
        a = {k: _Q(c) * sign for k, c in coeffs.items()}
        b = _Q(rhs) * sign
        s = n + r
        ub.append(_Q(0) if sense == EQ else None)
        values.append(_Q(0))
        if b >= 0 and not (sense == EQ and b != 0):
            rows.append(a)
            basis.append(s)
            values[s] = b
            continue
        # the slack cannot absorb the rhs: add an artificial basic variable
        flip = -1 if b < 0 else 1
        row = {k: v * flip for k, v in a.items()}
        row[s] = _Q(flip)
        rows.append(row)
        basis.append(None)
        art_rows.append((r, b * flip))
    first_art = n + R
    for idx, (r, val) in enumerate(art_rows):
        basis[r] = first_art + idx
        ub.append(None)
        values.append(val)
    artificials = art_rows
    tab = _Tableau(ub, basis, rows, values)

    if artificials:
        phase1 = [_Q(0)] * (first_art) + [_Q(1)] * len(artificials)
        tab.run(phase1, bland_only)
        infeas = sum((tab.x[v] for v in range(first_art, len(values))), _Q(0))
        if infeas > 0:
            raise InfeasibleLP("no feasible point")
        # drive zero-valued artificials out of the basis, dropping redundant rows
        r = 0
        while r < len(tab.T):
            b = tab.basis[r]
            if b < first_art:
                r += 1
                continue
            cands = [k for k in tab.T[r] if k < first_art]
            if cands:
                tab.d = {}
                tab.pivot(r, min(cands))
                r += 1
            else:
                del tab.T[r]
                del tab.basis[r]
        for row in tab.T:
            for v in range(first_art, len(values)):
                row.pop(v, None)
        for v in range(first_art, len(values)):
            tab.ub[v] = _Q(0)
            tab.x[v] = _Q(0)

    cost = [_Q(c) for c in lp.objective] + [_Q(0)] * (len(values) - n)
    tab.run(cost, bland_only)

    x = {lp.names[k]: Fraction(int(tab.x[k].numerator), int(tab.x[k].denominator)) for k in range(n)}
    obj = lp.value_of(x)
    tight = tuple(lp.tight_constraints(x))
    return VertexSolution(values=x, objective=obj, tight=tight, pivots=tab.pivots)


def is_vertex(lp: LinearProgram, sol: VertexSolution) -> bool:
    """The tight constraints at ``sol`` have full rank."""
    return rank([lp.constraint_vector(t) for t in sol.tight], lp.n_vars) == lp.n_vars


def xname(i: int, j: int) -> str:
    return f"x[{i},{j}]"


def yname(i: int) -> str:
    return f"y[{i}]"


def zname(j: int) -> str:
    return f"z[{j}]"


def build_kflo_relaxation(inst: Instance, k: Optional[int] = None) -> LinearProgram:
    """The kFLO relaxation; pass ``k = n`` (or leave ``inst.k`` unset) for FLO."""
    if inst.outliers_t is None:
        raise StructuralError("kflo relaxation needs an outlier budget t")
    if k is None:
        k = inst.k if inst.k is not None else inst.n
    lp = LinearProgram()
    for i in range(inst.n):
        lp.add_var(yname(i), inst.f(i))
    for i in range(inst.n):
        for j in range(inst.m):
            lp.add_var(xname(i, j), inst.c(i, j))
    for j in range(inst.m):
        lp.add_row({xname(i, j): 1 for i in range(inst.n)}, LE, 1, f"cover[{j}]")
    for i in range(inst.n):
        for j in range(inst.m):
            lp.add_row({xname(i, j): 1, yname(i): -1}, LE, 0, f"couple[{i},{j}]")
    lp.add_row({yname(i): 1 for i in range(inst.n)}, LE, k, "cardinality")
    lp.add_row({xname(i, j): 1 for i in range(inst.n) for j in range(inst.m)}, GE, inst.m - inst.t, "outliers")
    return lp


def build_lbflo_relaxation(inst: Instance, with_outliers: bool = True) -> LinearProgram:
    """The LBFLO relaxation with outlier variables ``z``.

    With ``with_outliers=False`` the ``z`` variables are omitted and every
    client must be fully served (the lower-bounded FL relaxation).
    """
    if with_outliers and inst.outliers_t is None:
        raise StructuralError("lbflo relaxation needs an outlier budget t")
    if any(fac.lower_bound is None for fac in inst.facilities):
        raise StructuralError("lbflo relaxation needs lower bounds on every facility")
    lp = LinearProgram()
    for i in range(inst.n):
        lp.add_var(yname(i), inst.f(i))
    for i in range(inst.n):
        for j in range(inst.m):
            lp.add_var(xname(i, j), inst.c(i, j))
    if with_outliers:
        for j in range(inst.m):
            lp.add_var(zname(j), 0)
    for j in range(inst.m):
        row = {xname(i, j): 1 for i in range(inst.n)}
        if with_outliers:
            row[zname(j)] = 1
        lp.add_row(row, GE, 1, f"cover[{j}]")
    for i in range(inst.n):
        row = {xname(i, j): 1 for j in range(inst.m)}
        row[yname(i)] = -inst.lower(i)
        lp.add_row(row, GE, 0, f"lower[{i}]")
    if with_outliers:
        lp.add_row({zname(j): 1 for j in range(inst.m)}, LE, inst.t, "outliers")
    for i in range(inst.n):
        for j in range(inst.m):
            lp.add_row({xname(i, j): 1, yname(i): -1}, LE, 0, f"couple[{i},{j}]")
    return lp
