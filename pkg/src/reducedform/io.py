"""JSON instance files and reports with exact rationals.

Rationals are written as ``"p/q"`` strings (integers as ``"p"``). Labels are
JSON strings or integers; list-valued types (ordinal rankings, cardinal
``(v, h)`` pairs) become tuples on load.

Instance layout::

    {"kind": "general" | "matching",
     "units": [...] | "agents": [...], "items": [...],
     "types": [[type, ...], ...],            # one list per unit / agent
     "prior": {"joint": [[profile, "p/q"], ...]}
            | {"independent": true, "marginals": [[[type, "p/q"], ...], ...]},
     "constraint": {...},                    # general kind, optional
     "allocation": [[profile, ["p/q", ...]], ...],
     "interim": [[key, "p/q"], ...],
     "priority": [key, ...],
     "objective": {...},
     "cardinal": {...}}
"""
from __future__ import annotations

import itertools
import json
from collections.abc import Mapping
from fractions import Fraction
from typing import Any

from .core import AllocationRule, Instance, InstanceError, Interim, Prior, as_fraction
from .polytopes import ConstraintFunction


class ParseError(InstanceError):
    """Malformed input, with the JSON path where it was found."""

    def __init__(self, path: str, msg: str):
        super().__init__(f"{path}: {msg}")
        self.path = path


# -- encoding ----------------------------------------------------------------

def rational_str(x) -> str:
    x = as_fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def encode(obj: Any) -> Any:
    """Plain-JSON form: rationals as strings (ints stay ints), tuples/sets as lists,
    non-string mapping keys as pairs."""
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, int):
        return obj
    if isinstance(obj, Fraction):
        return rational_str(obj)
    if isinstance(obj, Mapping):
        if all(isinstance(k, str) for k in obj):
            return {k: encode(v) for k, v in obj.items()}
        return [[encode(k), encode(v)] for k, v in obj.items()]
    if isinstance(obj, (frozenset, set)):
        return sorted((encode(x) for x in obj), key=lambda e: json.dumps(e, sort_keys=True))
    if isinstance(obj, (list, tuple)):
        return [encode(x) for x in obj]
    if hasattr(obj, "keys") and hasattr(obj, "pos"):  # PriorityOrder
        return [encode(k) for k in obj.keys]
    raise TypeError(f"cannot encode {type(obj).__name__}")


def dumps(obj: Any) -> str:
    return json.dumps(encode(obj), sort_keys=True, indent=2) + "\n"


def parse_rational(x, path: str = "$") -> Fraction:
    if isinstance(x, bool):
        raise ParseError(path, "expected a rational")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        try:
            return Fraction(x)
        except (ValueError, ZeroDivisionError):
            raise ParseError(path, f"bad rational {x!r}") from None
    raise ParseError(path, f"expected a rational string, got {type(x).__name__}")


def _hashable(x):
    if isinstance(x, list):
        return tuple(_hashable(y) for y in x)
    return x


def _label(x, path):
    if isinstance(x, (str, int)) and not isinstance(x, bool):
        return x
    raise ParseError(path, "labels must be strings or integers")


def loads(text: str) -> dict:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"line {e.lineno} col {e.colno}", e.msg) from None
    if not isinstance(doc, dict):
        raise ParseError("$", "top level must be an object")
    return doc


def load(path) -> dict:
    with open(path) as fh:
        return loads(fh.read())


# -- instances ---------------------------------------------------------------

def instance_from_dict(doc: Mapping, max_states: int | None = None) -> Instance:
    kw = {} if max_states is None else {"max_states": max_states}
    if "kind" not in doc and "cardinal" in doc:
        return cardinal_from_dict(doc["cardinal"]).instance()
    kind = doc.get("kind")
    if kind not in ("general", "matching"):
        raise ParseError("$.kind", f"expected 'general' or 'matching', got {kind!r}")
    ckey = "units" if kind == "general" else "agents"
    if ckey not in doc:
        raise ParseError(f"$.{ckey}", "missing")
    carriers = [_label(x, f"$.{ckey}[{j}]") for j, x in enumerate(doc[ckey])]
    items = []
    if kind == "matching":
        items = [_label(x, f"$.items[{j}]") for j, x in enumerate(doc.get("items", []))]
    types = doc.get("types")
    if not isinstance(types, list) or len(types) != len(carriers):
        raise ParseError("$.types", "need one list of types per carrier")
    type_sets = []
    for k, ts in enumerate(types):
        if not isinstance(ts, list) or not ts:
            raise ParseError(f"$.types[{k}]", "empty type set")
        type_sets.append([_hashable(x) for x in ts])
    prior = _prior(doc.get("prior"), type_sets)
    try:
        if kind == "general":
            return Instance.general(carriers, prior, **kw)
        return Instance.matching(carriers, items, prior, **kw)
    except InstanceError as e:
        if isinstance(e, ParseError):
            raise
        raise ParseError("$", str(e)) from None


def _prior(p, type_sets) -> Prior:
    if not isinstance(p, dict):
        raise ParseError("$.prior", "missing prior")
    try:
        if "joint" in p:
            joint = {}
            for j, entry in enumerate(p["joint"]):
                path = f"$.prior.joint[{j}]"
                if not isinstance(entry, list) or len(entry) != 2:
                    raise ParseError(path, "expected [profile, probability]")
                prob = parse_rational(entry[1], path + "[1]")
                if prob < 0:
                    raise ParseError(path, "negative probability")
                t = _hashable(entry[0])
                if t in joint:
                    raise ParseError(path, "duplicate profile")
                joint[t] = prob
            if sum(joint.values(), Fraction(0)) != 1:
                raise ParseError("$.prior.joint", "probabilities do not sum to 1")
            return Prior(type_sets, joint)
        if "marginals" in p:
            if not p.get("independent", False):
                raise ParseError("$.prior.independent", "marginals require independent: true")
            margs = []
            for k, m in enumerate(p["marginals"]):
                d = {}
                for j, (tau, prob) in enumerate(m):
                    prob = parse_rational(prob, f"$.prior.marginals[{k}][{j}]")
                    if prob < 0:
                        raise ParseError(f"$.prior.marginals[{k}][{j}]", "negative probability")
                    d[_hashable(tau)] = prob
                if sum(d.values(), Fraction(0)) != 1:
                    raise ParseError(f"$.prior.marginals[{k}]", "probabilities do not sum to 1")
                margs.append(d)
            if len(margs) != len(type_sets):
                raise ParseError("$.prior.marginals", "one marginal per carrier required")
            return Prior(type_sets, _product(type_sets, margs))
    except (ValueError, TypeError) as e:
        if isinstance(e, ParseError):
            raise
        raise ParseError("$.prior", str(e)) from None
    raise ParseError("$.prior", "expected 'joint' or 'marginals'")


def _product(type_sets, margs):
    joint = {}
    for t in itertools.product(*type_sets):
        p = Fraction(1)
        for k, tau in enumerate(t):
            p *= margs[k].get(tau, Fraction(0))
        if p:
            joint[t] = p
    return joint


def instance_to_dict(inst: Instance) -> dict:
    ckey = "units" if inst.kind == "general" else "agents"
    doc = {"kind": inst.kind, ckey: list(inst.carriers),
           "types": [list(ts) for ts in inst.type_sets],
           "prior": {"joint": [[list(t), inst.prior.prob(t)] for t in inst.states]}}
    if inst.kind == "matching":
        doc["items"] = list(inst.items)
    return encode(doc)


def parse_key(inst: Instance, x, path: str):
    key = _hashable(x)
    if key not in inst.key_index:
        raise ParseError(path, f"{x!r} is not a unit-type pair with positive mass")
    return key


def interim_from_list(inst: Instance, entries, path: str = "$.interim") -> Interim:
    vals = {}
    for j, e in enumerate(entries or []):
        if not isinstance(e, list) or len(e) != 2:
            raise ParseError(f"{path}[{j}]", "expected [key, value]")
        vals[parse_key(inst, e[0], f"{path}[{j}][0]")] = parse_rational(e[1], f"{path}[{j}][1]")
    return Interim(vals)


def interim_to_list(Q: Mapping) -> list:
    return encode([[k, v] for k, v in Q.items()])


def allocation_from_list(inst: Instance, entries, path: str = "$.allocation") -> AllocationRule:
    table = {}
    for j, e in enumerate(entries or []):
        if not isinstance(e, list) or len(e) != 2:
            raise ParseError(f"{path}[{j}]", "expected [profile, vector]")
        t = _hashable(e[0])
        vec = [parse_rational(x, f"{path}[{j}][1][{c}]") for c, x in enumerate(e[1])]
        if len(vec) != inst.n_coords:
            raise ParseError(f"{path}[{j}][1]", f"expected {inst.n_coords} coordinates")
        table[t] = vec
    return AllocationRule(inst.n_coords, table)


def allocation_to_list(q: AllocationRule) -> list:
    return encode([[t, list(v)] for t, v in q.items()])


def priority_from_list(inst: Instance, entries, path: str = "$.priority"):
    from .border import PriorityOrder
    keys = [parse_key(inst, x, f"{path}[{j}]") for j, x in enumerate(entries)]
    try:
        return PriorityOrder(inst, keys)
    except ValueError as e:
        raise ParseError(path, str(e)) from None


def constraint_from_dict(inst: Instance, c: Mapping | None, path: str = "$.constraint") -> ConstraintFunction:
    """``unit_supply``, ``capped`` (``cap``), ``budget_additive`` (``budgets``,
    optional ``by_state``) or ``table`` (``table``, optional ``by_state``)."""
    n = inst.n_coords
    if c is None:
        return ConstraintFunction.unit_supply(n)
    kind = c.get("kind")
    if kind == "unit_supply":
        return ConstraintFunction.unit_supply(n)
    if kind == "capped":
        return ConstraintFunction.capped_cardinality(n, parse_rational(c.get("cap"), path + ".cap"))
    if kind == "budget_additive":
        def budgets(b, p):
            out = []
            for j, (cap, w) in enumerate(b):
                ws = [parse_rational(x, f"{p}[{j}][1]") for x in w]
                if len(ws) != n:
                    raise ParseError(f"{p}[{j}][1]", f"expected {n} weights")
                out.append((parse_rational(cap, f"{p}[{j}][0]"), ws))
            return out
        base = budgets(c.get("budgets", []), path + ".budgets")
        by_state = {_hashable(t): budgets(b, f"{path}.by_state[{j}][1]")
                    for j, (t, b) in enumerate(c.get("by_state", []))}
        return ConstraintFunction.budget_additive(lambda t: by_state.get(t, base), n, not by_state)
    if kind == "table":
        def table(entries, p):
            return {frozenset(int(u) for u in A): parse_rational(v, f"{p}[{j}][1]")
                    for j, (A, v) in enumerate(entries)}
        base = table(c.get("table", []), path + ".table")
        st = {_hashable(t): table(tab, f"{path}.by_state[{j}][1]")
              for j, (t, tab) in enumerate(c.get("by_state", []))}
        return ConstraintFunction.from_table(n, base, st or None)
    raise ParseError(path + ".kind", f"unknown constraint kind {kind!r}")


def objective_from_dict(inst: Instance, o: Mapping, path: str = "$.objective"):
    from .da import MaxMin, PiecewiseLinear, RankDependent, Utilitarian

    def weights(entries, p):
        return {parse_key(inst, k, f"{p}[{j}][0]"): parse_rational(v, f"{p}[{j}][1]")
                for j, (k, v) in enumerate(entries)}
    kind = o.get("kind")
    if kind == "utilitarian":
        return Utilitarian(weights(o["v"], path + ".v"))
    if kind == "rank_dependent":
        pts = [(parse_rational(x, path + ".f"), parse_rational(y, path + ".f")) for x, y in o["f"]]
        return RankDependent(weights(o["v"], path + ".v"), PiecewiseLinear(tuple(pts)))
    if kind == "maxmin":
        return MaxMin(tuple(weights(w, f"{path}.W[{j}]") for j, w in enumerate(o["W"])))
    raise ParseError(path + ".kind", f"unknown objective kind {kind!r}")


def cardinal_from_dict(c: Mapping, path: str = "$.cardinal"):
    """``items``, optional ``agents`` labels, ``types``: per agent
    ``{"verticals": [...], "horizontals": [[...], ...], "joint": [[[v, h], p], ...]}``
    or ``{"verticals":..., "horizontals":..., "fv": [...], "gh": [...]}`` (independent)."""
    from .cardinal import CardinalAgent, CardinalTypeSpace
    items = [_label(x, f"{path}.items[{j}]") for j, x in enumerate(c.get("items", []))]
    agents = []
    for k, a in enumerate(c.get("types", [])):
        p = f"{path}.types[{k}]"
        vs = [parse_rational(v, f"{p}.verticals") for v in a["verticals"]]
        hs = [tuple(parse_rational(x, f"{p}.horizontals") for x in h) for h in a["horizontals"]]
        try:
            if "joint" in a:
                joint = {}
                for j, ((v, h), pr) in enumerate(a["joint"]):
                    joint[parse_rational(v, f"{p}.joint[{j}]"),
                          tuple(parse_rational(x, f"{p}.joint[{j}]") for x in h)] = \
                        parse_rational(pr, f"{p}.joint[{j}]")
                agents.append(CardinalAgent(tuple(vs), tuple(hs), joint))
            else:
                fv = {v: parse_rational(x, f"{p}.fv") for v, x in zip(vs, a["fv"])}
                gh = {h: parse_rational(x, f"{p}.gh") for h, x in zip(hs, a["gh"])}
                agents.append(CardinalAgent.independent(fv, gh))
        except ValueError as e:
            if isinstance(e, ParseError):
                raise
            raise ParseError(p, str(e)) from None
    labels = tuple(_label(x, f"{path}.agents") for x in c.get("agents", []))
    return CardinalTypeSpace(tuple(items), tuple(agents), labels)


def cardinal_to_dict(space) -> dict:
    return encode({
        "items": list(space.items),
        "agents": list(space.labels),
        "types": [{"verticals": list(a.verticals), "horizontals": [list(h) for h in a.horizontals],
                   "joint": [[[v, list(h)], p] for (v, h), p in a.joint.items()]}
                  for a in space.agents],
    })
