"""Cardinal types, virtual values and the design-order serial dictatorship.

An agent's type is ``(v, h)``: a vertical intensity ``v`` from a finite grid
and a horizontal type ``h`` giving a value ``h[n]`` for every item (a
permutation of common values). Utility from item ``n`` at price ``p`` is
``v * h[n] - p``.

The design order ranks triples ``(i, (v, h), n)`` by ``nu_i(v|h) * h[n]``;
triples with a nonpositive product are never assigned. Payments follow the
discrete Myerson construction along the vertical grid: with allocation
quality ``a_k`` at the ``k``-th grid point,

    p_1 = v_1 a_1,    p_k - p_{k-1} = v_k (a_k - a_{k-1}),

which makes every local downward incentive constraint bind.
"""
from __future__ import annotations

import itertools
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .border import PriorityOrder
from .core import ONE, ZERO, CapExceeded, Instance, Prior, State, Verdict, as_fraction
from .polytopes import max_weight_matching

MAX_SD_AGENTS = 5


@dataclass(frozen=True)
class CardinalAgent:
    """Vertical grid, horizontal types and the joint type distribution of one agent."""

    verticals: tuple
    horizontals: tuple
    joint: Mapping  # (v, h) -> probability

    def __post_init__(self):
        vs = tuple(as_fraction(v) for v in self.verticals)
        if any(b <= a for a, b in zip(vs, vs[1:])):
            raise ValueError("vertical grid must be strictly increasing")
        hs = tuple(tuple(as_fraction(x) for x in h) for h in self.horizontals)
        joint = {}
        for (v, h), p in dict(self.joint).items():
            v, h, p = as_fraction(v), tuple(as_fraction(x) for x in h), as_fraction(p)
            if v not in vs or h not in hs:
                raise ValueError(f"type {(v, h)!r} outside the declared grids")
            if p < 0:
                raise ValueError("negative type probability")
            if p:
                joint[v, h] = p
        if sum(joint.values(), ZERO) != 1:
            raise ValueError("type probabilities must sum to 1")
        object.__setattr__(self, "verticals", vs)
        object.__setattr__(self, "horizontals", hs)
        object.__setattr__(self, "joint", joint)
        g = {}
        for (v, h), p in joint.items():
            g[h] = g.get(h, ZERO) + p
        nus = {}
        for h in hs:
            tail = g.get(h, ZERO)
            for v in vs:
                if (v, h) in joint:
                    f = joint[v, h] / g[h]
                    tail -= joint[v, h]
                    nus[v, h] = v - (tail / g[h]) / f
        object.__setattr__(self, "_g", g)
        object.__setattr__(self, "_nu", nus)

    @classmethod
    def independent(cls, fv: Mapping, gh: Mapping) -> "CardinalAgent":
        vs = sorted(as_fraction(v) for v in fv)
        hs = [tuple(as_fraction(x) for x in h) for h in gh]
        joint = {(as_fraction(v), tuple(as_fraction(x) for x in h)): as_fraction(p) * as_fraction(q)
                 for v, p in fv.items() for h, q in gh.items()}
        return cls(tuple(vs), tuple(hs), joint)

    def types(self) -> list[tuple]:
        return [(v, h) for h in self.horizontals for v in self.verticals if (v, h) in self.joint]

    def g(self, h) -> Fraction:
        return self._g.get(h, ZERO)

    def f(self, v, h) -> Fraction:
        return self.joint.get((v, h), ZERO) / self.g(h)

    def F(self, v, h) -> Fraction:
        return sum((self.f(w, h) for w in self.verticals if w <= v), ZERO)

    def nu(self, v, h) -> Fraction:
        """Virtual value ``v - (1 - F(v|h)) / f(v|h)``."""
        return self._nu[v, h]

    def is_independent(self) -> bool:
        fv = {v: sum((p for (w, _), p in self.joint.items() if w == v), ZERO) for v in self.verticals}
        return all(self.joint.get((v, h), ZERO) == fv[v] * self.g(h)
                   for v in self.verticals for h in self.horizontals)

    def is_regular(self) -> bool:
        """``v -> nu(v|h)`` strictly increasing on each horizontal's support."""
        for h in self.horizontals:
            vs = [v for v in self.verticals if (v, h) in self.joint]
            nus = [self.nu(v, h) for v in vs]
            if any(b <= a for a, b in zip(nus, nus[1:])):
                return False
        return True


def ranking_of(h: Sequence, items: Sequence) -> tuple:
    """Items best first under horizontal values ``h`` (ties by item order)."""
    return tuple(items[n] for n in sorted(range(len(items)), key=lambda n: -h[n]))


@dataclass
class CardinalTypeSpace:
    items: tuple
    agents: tuple  # CardinalAgent per agent
    labels: tuple = ()
    _inst: Optional[Instance] = field(default=None, repr=False)

    def __post_init__(self):
        self.items = tuple(self.items)
        self.agents = tuple(self.agents)
        if not self.labels:
            self.labels = tuple(f"i{k + 1}" for k in range(len(self.agents)))
        for a in self.agents:
            for h in a.horizontals:
                if len(h) != len(self.items):
                    raise ValueError("horizontal type needs one value per item")

    def instance(self) -> Instance:
        """Matching instance with independent agents and types ``(v, h)``."""
        if self._inst is None:
            marg = [{tau: a.joint[tau] for tau in a.types()} for a in self.agents]
            self._inst = Instance.matching(self.labels, self.items, Prior.product(marg))
        return self._inst

    def uniform_horizontals(self) -> bool:
        """Every ``h`` is a permutation of 1..N and all of an agent's ``h`` are equally likely."""
        N = len(self.items)
        target = sorted(Fraction(k) for k in range(1, N + 1))
        for a in self.agents:
            if any(sorted(h) != target for h in a.horizontals):
                return False
            gs = {a.g(h) for h in a.horizontals}
            if len(gs) != 1:
                return False
        return True

    def is_regular(self) -> bool:
        return all(a.is_regular() for a in self.agents)

    def is_independent(self) -> bool:
        return all(a.is_independent() for a in self.agents)

    def nu(self, i: int, tau) -> Fraction:
        return self.agents[i].nu(*tau)

    def score(self, key) -> Fraction:
        i, (v, h), n = key
        k = self.labels.index(i)
        return self.agents[k].nu(v, h) * h[self.items.index(n)]


@dataclass(frozen=True)
class DesignOrder:
    order: PriorityOrder
    cutoff: int  # number of triples with positive score

    def positive(self) -> tuple:
        return self.order.keys[:self.cutoff]


def design_order(space: CardinalTypeSpace, base_priority: Optional[Sequence] = None) -> DesignOrder:
    """Triples by decreasing ``nu * h[n]``; ties by base priority, item, then type order."""
    inst = space.instance()
    base = list(base_priority) if base_priority is not None else list(space.labels)
    brank = {i: r for r, i in enumerate(base)}
    tindex = {}
    for k, ts in enumerate(inst.type_sets):
        for r, tau in enumerate(ts):
            tindex[k, tau] = r
    scores = {key: space.score(key) for key in inst.tstar}

    def sort_key(key):
        i, tau, n = key
        return (-scores[key], brank[i], space.items.index(n), tindex[space.labels.index(i), tau])

    keys = sorted(inst.tstar, key=sort_key)
    cutoff = sum(1 for key in keys if scores[key] > 0)
    return DesignOrder(PriorityOrder(inst, keys), cutoff)


def _triples_by_type(d: DesignOrder, space: CardinalTypeSpace) -> dict:
    memo = d.__dict__.get("_by_type")
    if memo is None:
        memo = {}
        for pos, (i, tau, n) in enumerate(d.positive()):
            memo.setdefault((space.labels.index(i), tau), []).append((pos, i, n))
        object.__setattr__(d, "_by_type", memo)
    return memo


def greedy_design_outcome(d: DesignOrder, space: CardinalTypeSpace, t: State) -> dict:
    """Agent -> item under the truncated design-order greedy in profile ``t``."""
    by_type = _triples_by_type(d, space)
    triples = sorted(x for k, tau in enumerate(t) for x in by_type.get((k, tau), ()))
    used_i, used_n = set(), set()
    out = {i: None for i in space.labels}
    for _, i, n in triples:
        if i in used_i or n in used_n:
            continue
        used_i.add(i)
        used_n.add(n)
        out[i] = n
    return out


def serial_dictatorship_run(rankings: Mapping, agent_order: Sequence) -> dict:
    """Agents in ``agent_order`` take their best remaining item; others get nothing."""
    taken = set()
    out = {i: None for i in rankings}
    for i in agent_order:
        for n in rankings[i]:
            if n not in taken:
                taken.add(n)
                out[i] = n
                break
    return out


def _profiles(space: CardinalTypeSpace, common_only: bool):
    """Group support profiles by vertical profile; optionally keep common-ranking ones."""
    inst = space.instance()
    groups: dict = {}
    for t in inst.states:
        if common_only:
            ranks = {ranking_of(h, space.items) for _, h in t}
            if len(ranks) > 1:
                continue
        groups.setdefault(tuple(v for v, _ in t), []).append(t)
    return groups


def is_type_specific_sd(outcome: Callable[[State], Mapping], space: CardinalTypeSpace,
                        common_only: bool = True) -> Verdict:
    """For each vertical profile, one agent order explains every horizontal profile.

    Orders range over arrangements of subsets of agents (agents left out get
    nothing). ``common_only`` restricts to horizontal profiles in which all
    agents rank the items identically. Witness on failure is the vertical
    profile.
    """
    n_agents = len(space.labels)
    if n_agents > MAX_SD_AGENTS:
        raise CapExceeded(f"{n_agents} agents exceed the serial-dictatorship search cap")
    found = {}
    outcome = _memo(outcome)
    for vv, states in _profiles(space, common_only).items():
        outs = [(t, dict(outcome(t))) for t in states]
        ok = None
        for r in range(n_agents, -1, -1):
            for order in itertools.permutations(space.labels, r):
                good = True
                for t, o in outs:
                    ranks = {i: ranking_of(h, space.items) for i, (_, h) in zip(space.labels, t)}
                    if serial_dictatorship_run(ranks, order) != o:
                        good = False
                        break
                if good:
                    ok = order
                    break
            if ok is not None:
                break
        if ok is None:
            return Verdict(False, vv, {"profiles": len(outs)})
        found[vv] = ok
    return Verdict(True, info={"orders": found})


# -- payments -------------------------------------------------------------

def _memo(outcome):
    if getattr(outcome, "_memoized", False):
        return outcome
    cache: dict = {}

    def f(t):
        r = cache.get(t)
        if r is None:
            r = cache[t] = dict(outcome(t))
        return r
    f._memoized = True
    return f


def _quality(h, item, items) -> Fraction:
    return ZERO if item is None else h[items.index(item)]


def _myerson(vs: Sequence[Fraction], a: Sequence[Fraction]) -> list[Fraction]:
    for x, y in zip(a, a[1:]):
        if y < x:
            raise ValueError("allocation quality decreases in the vertical report")
    p = []
    prev_a = ZERO
    acc = ZERO
    for v, ak in zip(vs, a):
        acc += v * (ak - prev_a)
        prev_a = ak
        p.append(acc)
    return p


@dataclass
class PaymentRule:
    """Payments by state and agent.

    Known-h rules are stored ex post (``table[state][k]``). Unknown-h rules
    store interim tables ``interim[k][(v, h)]`` for each report together with
    the same construction done separately per horizontal type.
    """

    mode: str
    table: dict = field(default_factory=dict)
    interim: list = field(default_factory=list)
    per_h: list = field(default_factory=list)
    h_invariant: bool = True

    def __call__(self, t: State, k: int) -> Fraction:
        if self.mode == "known_h":
            return self.table.get(t, {}).get(k, ZERO)
        return self.interim[k][t[k]]


def payments_for(outcome: Callable[[State], Mapping], space: CardinalTypeSpace, mode: str) -> PaymentRule:
    """Discrete Myerson payments for the allocation ``outcome``.

    ``known_h``: per state, along the agent's vertical grid with everything
    else fixed. ``unknown_h``: along the grid in expectation over the other
    agents' types, once per horizontal type; the rule charges the table of
    the reported horizontal type and records whether all tables coincide.
    """
    inst = space.instance()
    items = space.items
    outcome = _memo(outcome)
    if mode == "known_h":
        table: dict = {}
        for t in inst.states:
            row = {}
            for k, i in enumerate(space.labels):
                v, h = t[k]
                ag = space.agents[k]
                vs = [w for w in ag.verticals if (w, h) in ag.joint]
                a = [_quality(h, outcome(t[:k] + ((w, h),) + t[k + 1:])[i], items) for w in vs]
                row[k] = _myerson(vs, a)[vs.index(v)]
            table[t] = row
        return PaymentRule(mode, table=table)
    if mode == "unknown_h":
        if not space.is_independent():
            raise ValueError("unknown_h payments need vertical and horizontal types independent")
        interim, per_h = [], []
        invariant = True
        for k, i in enumerate(space.labels):
            ag = space.agents[k]
            tabs = {}
            for h in ag.horizontals:
                vs = [w for w in ag.verticals if (w, h) in ag.joint]
                a = [expected_quality(outcome, space, k, (w, h), h) for w in vs]
                tabs[h] = dict(zip(vs, _myerson(vs, a)))
            first = next(iter(tabs.values()))
            if any(tab != first for tab in tabs.values()):
                invariant = False
            per_h.append(tabs)
            interim.append({(w, h): tabs[h][w] for h in tabs for w in tabs[h]})
        return PaymentRule(mode, interim=interim, per_h=per_h, h_invariant=invariant)
    raise ValueError(f"unknown mode {mode!r}")


def _others(space: CardinalTypeSpace, k: int):
    return _others_list(space, k)


def _others_list(space, k):
    memo = space.__dict__.setdefault("_memo_others", {})
    if k not in memo:
        memo[k] = list(_others_gen(space, k))
    return memo[k]


def _others_gen(space: CardinalTypeSpace, k: int):
    inst = space.instance()
    ts = [a.types() for a in space.agents]
    for rest in itertools.product(*(ts[j] for j in range(len(ts)) if j != k)):
        p = ONE
        for j, tau in zip((j for j in range(len(ts)) if j != k), rest):
            p *= inst.prior.marginal(j, tau)
        if p:
            yield rest, p


def _with(rest, k, tau):
    return tuple(rest[:k]) + (tau,) + tuple(rest[k:])


def expected_quality(outcome, space: CardinalTypeSpace, k: int, report, h_true) -> Fraction:
    """``E[h_true[item]]`` over the others' types when agent ``k`` reports ``report``."""
    i = space.labels[k]
    total = ZERO
    for rest, p in _others(space, k):
        total += p * _quality(h_true, outcome(_with(rest, k, report))[i], space.items)
    return total


def ic_check(outcome: Callable[[State], Mapping], payment: Callable[[State, int], Fraction],
             space: CardinalTypeSpace, mode: str) -> Verdict:
    """Search for a profitable misreport.

    ``known_h``: every support state, agent and vertical misreport (the
    horizontal type is observed). ``unknown_h``: interim expected utility
    over every ``(v, h)`` misreport. Witness: ``(agent, true type, report)``.
    """
    inst = space.instance()
    items = space.items
    outcome = _memo(outcome)
    if mode == "known_h":
        for t in inst.states:
            for k, i in enumerate(space.labels):
                v, h = t[k]
                ag = space.agents[k]
                base = v * _quality(h, outcome(t)[i], items) - payment(t, k)
                for w in ag.verticals:
                    if w == v or (w, h) not in ag.joint:
                        continue
                    s = t[:k] + ((w, h),) + t[k + 1:]
                    dev = v * _quality(h, outcome(s)[i], items) - payment(s, k)
                    if dev > base:
                        return Verdict(False, (i, t[k], (w, h)), {"state": t, "gain": dev - base})
        return Verdict(True)
    if mode == "unknown_h":
        for k, i in enumerate(space.labels):
            types = space.agents[k].types()
            # per report: probability of each item and expected payment
            lottery = {}
            for rep in types:
                probs = [ZERO] * len(items)
                pay = ZERO
                for rest, p in _others(space, k):
                    s = _with(rest, k, rep)
                    n = outcome(s)[i]
                    if n is not None:
                        probs[items.index(n)] += p
                    pay += p * payment(s, k)
                lottery[rep] = (probs, pay)

            def utility(v, h, rep):
                probs, pay = lottery[rep]
                return v * sum((x * y for x, y in zip(probs, h)), ZERO) - pay
            for v, h in types:
                base = utility(v, h, (v, h))
                for rep in types:
                    if rep == (v, h):
                        continue
                    dev = utility(v, h, rep)
                    if dev > base:
                        return Verdict(False, (i, (v, h), rep), {"gain": dev - base})
        return Verdict(True)
    raise ValueError(f"unknown mode {mode!r}")


# -- approximation ----------------------------------------------------------

def virtual_surplus_benchmark(space: CardinalTypeSpace, weight: Callable) -> Fraction:
    """``sum_t mu(t) * max-weight matching`` with nonnegative part of ``weight(k, tau, n)``."""
    inst = space.instance()
    total = ZERO
    rows = {}
    memo = {}
    for t in inst.states:
        w = []
        for k, tau in enumerate(t):
            if (k, tau) not in rows:
                rows[k, tau] = tuple(max(weight(k, tau, n), ZERO) for n in range(len(space.items)))
            w.append(rows[k, tau])
        w = tuple(w)
        if w not in memo:
            memo[w] = max_weight_matching([list(r) for r in w])[0]
        total += inst.prior.prob(t) * memo[w]
    return total


def outcome_value(outcome, space: CardinalTypeSpace, weight: Callable) -> Fraction:
    inst = space.instance()
    total = ZERO
    for t in inst.states:
        o = outcome(t)
        for k, i in enumerate(space.labels):
            if o[i] is not None:
                total += inst.prior.prob(t) * weight(k, t[k], space.items.index(o[i]))
    return total


def revenue_2approx_check(space: CardinalTypeSpace, base_priority: Optional[Sequence] = None) -> Verdict:
    """Design-order greedy virtual surplus against the full-information optimum.

    ``witness`` is the revenue ratio; the welfare ratio is reported in
    ``info`` without being judged.
    """
    d = design_order(space, base_priority)

    def virt(k, tau, n):
        return space.agents[k].nu(*tau) * tau[1][n]

    def welfare(k, tau, n):
        return tau[0] * tau[1][n]

    out = _memo(lambda t: greedy_design_outcome(d, space, t))
    got = outcome_value(out, space, virt)
    bench = virtual_surplus_benchmark(space, virt)
    ratio = got / bench if bench else ONE
    w_got = outcome_value(out, space, welfare)
    w_bench = virtual_surplus_benchmark(space, welfare)
    info = {"virtual_surplus": got, "benchmark": bench,
            "welfare": w_got, "welfare_benchmark": w_bench,
            "welfare_ratio": w_got / w_bench if w_bench else ONE}
    return Verdict(ratio >= Fraction(1, 2), ratio, info)


def expected_revenue(payment: Callable, space: CardinalTypeSpace) -> Fraction:
    inst = space.instance()
    return sum((inst.prior.prob(t) * payment(t, k) for t in inst.states
                for k in range(len(space.labels))), ZERO)


def permutation_horizontals(n_items: int) -> list[tuple]:
    """All horizontal types that permute the values 1..N."""
    return [tuple(Fraction(x) for x in p) for p in itertools.permutations(range(1, n_items + 1))]
