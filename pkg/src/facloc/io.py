"""JSON files for instances and solutions.

Rationals are written as strings ("3/4"); on input, integers, decimal
strings ("0.25") and fraction strings are all parsed exactly.  Floats are
rejected because they are not exact.
"""

from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path
from typing import Optional

from .instance import Facility, Instance, IntegralSolution, StructuralError, euclidean_metric, make_solution

DEFAULT_GRID = 100


class FormatError(ValueError):
    """Malformed instance or solution file."""


def parse_rational(value, what: str = "number") -> Fraction:
    if isinstance(value, bool) or isinstance(value, float):
        raise FormatError(f"{what}: {value!r} is not exact; write it as a string")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as e:
            raise FormatError(f"{what}: cannot parse {value!r}") from e
    raise FormatError(f"{what}: unexpected {type(value).__name__}")


def _opt_int(value, what: str) -> Optional[int]:
    if value is None:
        return None
    q = parse_rational(value, what)
    if q.denominator != 1:
        raise FormatError(f"{what}: {value!r} is not an integer")
    return int(q)


def instance_from_dict(data: dict) -> Instance:
    if not isinstance(data, dict):
        raise FormatError("instance must be a JSON object")
    try:
        facs_raw, clients_raw = data["facilities"], data["clients"]
    except KeyError as e:
        raise FormatError(f"missing field {e.args[0]!r}") from e
    facs = []
    for k, f in enumerate(facs_raw):
        if "id" not in f:
            raise FormatError(f"facility #{k} has no id")
        facs.append(Facility(
            str(f["id"]),
            parse_rational(f.get("open_cost", 0), f"open_cost of {f['id']}"),
            _opt_int(f.get("lower_bound"), f"lower_bound of {f['id']}"),
            _opt_int(f.get("capacity"), f"capacity of {f['id']}"),
        ))
    clients = [str(c["id"]) if isinstance(c, dict) else str(c) for c in clients_raw]
    ids = [f.id for f in facs] + clients
    if len(set(ids)) != len(ids):
        raise FormatError("facility and client ids must be distinct")
    has_points, has_dist = "points" in data, "dist" in data
    if has_points == has_dist:
        raise FormatError("exactly one of 'points' and 'dist' is required")
    size = len(ids)
    if has_dist:
        rows = data["dist"]
        if len(rows) != size or any(len(r) != size for r in rows):
            raise FormatError(f"dist must be {size}x{size} over facilities then clients")
        dist = tuple(tuple(parse_rational(v, "dist entry") for v in r) for r in rows)
    else:
        pts = data["points"]
        if isinstance(pts, dict):
            missing = [x for x in ids if x not in pts]
            if missing:
                raise FormatError(f"points missing for {missing}")
            pts = [pts[x] for x in ids]
        if len(pts) != size:
            raise FormatError(f"expected {size} points")
        coords = [(parse_rational(p[0], "x"), parse_rational(p[1], "y")) for p in pts]
        dist = euclidean_metric(coords, int(data.get("grid", DEFAULT_GRID)))
    return Instance(tuple(facs), tuple(clients), dist,
                    k=_opt_int(data.get("k"), "k"), outliers_t=_opt_int(data.get("outliers"), "outliers"))


def instance_to_dict(inst: Instance) -> dict:
    facs = []
    for f in inst.facilities:
        row = {"id": f.id, "open_cost": str(f.open_cost)}
        if f.lower_bound is not None:
            row["lower_bound"] = f.lower_bound
        if f.capacity is not None:
            row["capacity"] = f.capacity
        facs.append(row)
    out = {
        "facilities": facs,
        "clients": [{"id": c} for c in inst.clients],
        "dist": [[str(v) for v in row] for row in inst.dist],
    }
    if inst.k is not None:
        out["k"] = inst.k
    if inst.outliers_t is not None:
        out["outliers"] = inst.outliers_t
    return out


def solution_to_dict(inst: Instance, sol: IntegralSolution) -> dict:
    return {
        "open": [inst.facilities[i].id for i in sorted(sol.open)],
        "assign": {inst.clients[j]: inst.facilities[i].id for j, i in sorted(sol.assign.items())},
        "outliers": [inst.clients[j] for j in sorted(sol.outliers)],
        "cost_facility": str(sol.cost_facility),
        "cost_connect": str(sol.cost_connect),
        "cost": str(sol.cost),
    }


def solution_from_dict(inst: Instance, data: dict) -> IntegralSolution:
    """Rebuild a solution by id; the stored cost, if any, must match."""
    if not isinstance(data, dict) or "open" not in data or "assign" not in data:
        raise FormatError("solution needs 'open' and 'assign'")
    fidx, cidx = inst.facility_index(), inst.client_index()
    try:
        opened = [fidx[f] for f in data["open"]]
        assign = {cidx[c]: fidx[f] for c, f in data["assign"].items()}
        outliers = {cidx[c] for c in data.get("outliers", [])}
    except KeyError as e:
        raise StructuralError(f"unknown id {e.args[0]!r}") from e
    if outliers & set(assign):
        raise StructuralError("a client is both assigned and an outlier")
    if "outliers" in data and len(outliers) + len(assign) != inst.m:
        raise StructuralError("assigned clients and outliers do not cover every client")
    sol = make_solution(inst, opened, assign)
    if "cost" in data and parse_rational(data["cost"], "cost") != sol.cost:
        raise FormatError(f"stored cost {data['cost']} differs from recomputed {sol.cost}")
    return sol


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise FormatError(f"{path}: invalid JSON ({e})") from e


def write_json(path, obj) -> None:
    Path(path).write_text(dumps(obj))


def load_instance(path) -> Instance:
    return instance_from_dict(read_json(path))


def save_instance(path, inst: Instance) -> None:
    write_json(path, instance_to_dict(inst))


def load_solution(path, inst: Instance) -> IntegralSolution:
    return solution_from_dict(inst, read_json(path))


def save_solution(path, inst: Instance, sol: IntegralSolution) -> None:
    write_json(path, solution_to_dict(inst, sol))
