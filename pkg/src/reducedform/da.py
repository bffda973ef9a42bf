"""Principal priorities, deferred acceptance and objectives over matchings.

Ordinal types are tuples of item labels, best first. A principal priority
is a strict order on TStar triples ``(agent, type, item)``; the greedy
matching along it is compared with agent-proposing deferred acceptance run
on item rankings extracted from the same order.
"""
from __future__ import annotations

import itertools
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .border import PriorityOrder
from .core import ONE, ZERO, CapExceeded, Instance, Interim, State, Verdict, WeightVector, as_fraction
from .matching import greedy_matching, greedy_state
from .polytopes import MatchingPolytope, partial_matchings

MAX_STABLE_ENUMERATION = 4


def prefers(tau: Sequence, x, y) -> bool:
    """``x tau y``: item ``x`` ranks strictly above ``y`` (``None`` = unmatched, ranks last)."""
    if x == y:
        return False
    if y is None:
        return x is not None
    if x is None:
        return False
    return tau.index(x) < tau.index(y)


def check_ordinal_types(inst: Instance) -> None:
    items = set(inst.items)
    for k, ts in enumerate(inst.type_sets):
        for tau in ts:
            if not isinstance(tau, tuple) or set(tau) != items or len(tau) != len(items):
                raise ValueError(f"type {tau!r} of {inst.carriers[k]!r} is not a ranking of all items")


class PrincipalPriority(PriorityOrder):
    """Priority over triples with the set of unblocked triples cached."""

    __slots__ = ("unblocked", "inst")

    def __init__(self, inst: Instance, keys: Iterable):
        super().__init__(inst, keys)
        self.inst = inst
        if len(inst.states) > inst.max_states:
            raise CapExceeded("state cap exceeded")
        reached = set()
        for t in inst.states:
            reached.update(greedy_state(self, inst, t))
        self.unblocked = frozenset(reached)

    @classmethod
    def from_order(cls, R: PriorityOrder, inst: Instance) -> "PrincipalPriority":
        return cls(inst, R.keys)

    def is_blocked(self, key) -> bool:
        return key not in self.unblocked

    def moved(self, segment: Sequence, after) -> "PrincipalPriority":
        """Copy with ``segment`` removed and reinserted right after ``after``."""
        rest = [k for k in self.keys if k not in set(segment)]
        j = rest.index(after) + 1
        return PrincipalPriority(self.inst, rest[:j] + list(segment) + rest[j:])


def blocked(p: PrincipalPriority, key, inst: Instance = None) -> bool:
    """No state with the key's type has the greedy matching give its item to its agent."""
    if key not in p.pos:
        raise ValueError(f"{key!r} is not in TStar")
    return p.is_blocked(key)


def is_welfarist(p: PrincipalPriority, inst: Instance) -> Verdict:
    """Unblocked ``(i, tau, n)`` above ``(i, tau, n')`` requires ``n tau n'``."""
    for a in p.keys:
        if a not in p.unblocked:
            continue
        i, tau, n = a
        for b in p.keys[p.pos[a] + 1:]:
            if b[0] == i and b[1] == tau and not prefers(tau, n, b[2]):
                return Verdict(False, (a, b))
    return Verdict(True)


def is_item_ranking_consistent(p: PrincipalPriority, inst: Instance) -> Verdict:
    """The consistency condition, plus the item rankings it licenses.

    ``info["rankings"]`` maps each item to agents best first: agents with an
    unblocked triple for the item ordered by their best such triple, then the
    rest by agent index. On failure the witness is the offending pair of
    triples ``((i, tau, n), (j, tau2, n))`` with ``(j, tau''', n)`` unblocked
    above some ``(i, tau'', n)``.
    """
    # definition: unblocked (i,tau,n) > (j,tau',n) forces every (i,.,n) above
    # every unblocked (j,.,n)
    for n in inst.items:
        col = [k for k in p.keys if k[2] == n]
        for a in col:
            if a not in p.unblocked:
                continue
            for b in col[col.index(a) + 1:]:
                if b[0] == a[0]:
                    continue
                i, j = a[0], b[0]
                for c in col:
                    if c[0] == j and c in p.unblocked:
                        for d in col:
                            if d[0] == i and p.pos[d] > p.pos[c]:
                                return Verdict(False, (a, b, c, d))
    rankings = {}
    agent_index = {i: k for k, i in enumerate(inst.carriers)}
    for n in inst.items:
        best = {}
        for k in p.keys:
            if k[2] == n and k in p.unblocked and k[0] not in best:
                best[k[0]] = p.pos[k]
        D = sorted(best, key=best.get)
        rest = sorted((i for i in inst.carriers if i not in best), key=agent_index.get)
        rankings[n] = D + rest
        # the licensed condition: unblocked (i,.,n) above (j,.,n) means i before j
        rank = {i: r for r, i in enumerate(rankings[n])}
        col = [k for k in p.keys if k[2] == n]
        for x, a in enumerate(col):
            if a in p.unblocked:
                for b in col[x + 1:]:
                    if b[0] != a[0] and rank[a[0]] > rank[b[0]]:  # pragma: no cover
                        return Verdict(False, (a, b), {"rankings": rankings})
    return Verdict(True, info={"rankings": rankings})


def deferred_acceptance(prefs: Mapping, priorities: Mapping) -> dict:
    """Agent-proposing deferred acceptance; returns agent -> item or None.

    ``prefs[i]`` lists acceptable items best first; ``priorities[n]`` lists
    agents best first. Free agents propose in their listing order.
    """
    agents = list(prefs)
    nxt = {i: 0 for i in agents}
    held: dict = {}
    rank = {n: {i: r for r, i in enumerate(pr)} for n, pr in priorities.items()}
    free = list(agents)
    while free:
        i = free.pop(0)
        if nxt[i] >= len(prefs[i]):
            continue
        n = prefs[i][nxt[i]]
        nxt[i] += 1
        cur = held.get(n)
        if i not in rank[n]:
            free.insert(0, i)
        elif cur is None:
            held[n] = i
        elif rank[n][i] < rank[n][cur]:
            held[n] = i
            free.insert(0, cur)
        else:
            free.insert(0, i)
    out = {i: None for i in agents}
    for n, i in held.items():
        out[i] = n
    return out


def state_prefs(inst: Instance, t: State) -> dict:
    return {i: t[k] for k, i in enumerate(inst.carriers)}


def greedy_outcome(p: PriorityOrder, inst: Instance, t: State) -> dict:
    out = {i: None for i in inst.carriers}
    for i, _, n in greedy_state(p, inst, t):
        out[i] = n
    return out


def blocking_pairs(matching: Mapping, prefs: Mapping, priorities: Mapping) -> list:
    holder = {n: i for i, n in matching.items() if n is not None}
    out = []
    for i, tau in prefs.items():
        for n in tau:
            if not prefers(tau, n, matching[i]):
                continue
            h = holder.get(n)
            pr = priorities[n]
            if h is None or pr.index(i) < pr.index(h):
                out.append((i, n))
    return out


def stable_matchings(inst: Instance, prefs: Mapping, priorities: Mapping) -> list[dict]:
    if len(inst.carriers) > MAX_STABLE_ENUMERATION or len(inst.items) > MAX_STABLE_ENUMERATION:
        raise CapExceeded("stable-matching enumeration limited to 4 agents and 4 items")
    out = []
    for m in partial_matchings(len(inst.carriers), len(inst.items)):
        match = {i: None for i in inst.carriers}
        for a, b in m:
            match[inst.carriers[a]] = inst.items[b]
        if not blocking_pairs(match, prefs, priorities):
            out.append(match)
    return out


def is_agent_optimal(match: Mapping, stable: Sequence[Mapping], prefs: Mapping) -> bool:
    return all(not prefers(prefs[i], other[i], match[i]) for other in stable for i in match)


def greedy_equals_da(p: PrincipalPriority, inst: Instance, check_optimal: bool = True) -> Verdict:
    """Greedy along ``p`` equals deferred acceptance with the derived item rankings.

    Each state's outcome is also checked for stability and, at desk scale,
    agent-optimality among all stable matchings.
    """
    if not is_welfarist(p, inst):
        raise ValueError("priority is not welfarist")
    irc = is_item_ranking_consistent(p, inst)
    if not irc:
        raise ValueError("priority is not item-ranking consistent")
    rankings = irc.info["rankings"]
    checked = 0
    for t in inst.states:
        prefs = state_prefs(inst, t)
        g = greedy_outcome(p, inst, t)
        d = deferred_acceptance(prefs, rankings)
        if g != d:
            return Verdict(False, t, {"greedy": g, "da": d, "rankings": rankings})
        if blocking_pairs(g, prefs, rankings):
            return Verdict(False, t, {"unstable": blocking_pairs(g, prefs, rankings)})
        if check_optimal:
            st = stable_matchings(inst, prefs, rankings)
            if not is_agent_optimal(g, st, prefs):
                return Verdict(False, t, {"not_agent_optimal": g})
        checked += 1
    return Verdict(True, info={"rankings": rankings, "states": checked})


def dsic_check(p: PriorityOrder, inst: Instance) -> Verdict:
    """No agent gains by misreporting its ranking, in any support state."""
    for t in inst.states:
        truth = greedy_outcome(p, inst, t)
        for k, i in enumerate(inst.carriers):
            tau = t[k]
            for lie in inst.type_sets[k]:
                if lie == tau:
                    continue
                s = t[:k] + (lie,) + t[k + 1:]
                got = greedy_outcome(p, inst, s)[i]
                if prefers(tau, got, truth[i]):
                    return Verdict(False, (t, i, lie), {"truthful": truth[i], "deviation": got})
    return Verdict(True)


def lexicographic_priority(inst: Instance, agent_order: Sequence) -> PrincipalPriority:
    """Agents in ``agent_order``; within an agent, types in type-set order, items by the type."""
    keys = []
    for i in agent_order:
        k = inst.carrier_index(i)
        for tau in inst.type_sets[k]:
            if inst.prior.marginal(k, tau):
                keys.extend((i, tau, n) for n in tau)
    return PrincipalPriority(inst, keys)


def common_ranking_priority(inst: Instance, item_ranking: Sequence) -> PrincipalPriority:
    """Rank by a common agent ranking first, then by each agent's own preferences."""
    return lexicographic_priority(inst, item_ranking)


# -- objectives ---------------------------------------------------------------

@dataclass(frozen=True)
class PiecewiseLinear:
    """Concave-or-not piecewise-linear ``f`` through (0, 0) and ``points``.

    Beyond the last breakpoint ``f`` continues with the last slope.
    """

    points: tuple

    def __post_init__(self):
        pts = tuple((as_fraction(x), as_fraction(y)) for x, y in self.points)
        if not pts or pts[0] != (ZERO, ZERO):
            pts = ((ZERO, ZERO),) + pts
        xs = [x for x, _ in pts]
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        if len(pts) < 2:
            raise ValueError("need at least one breakpoint besides the origin")
        object.__setattr__(self, "points", pts)

    @classmethod
    def identity(cls) -> "PiecewiseLinear":
        return cls(((0, 0), (1, 1)))

    def slopes(self) -> list[Fraction]:
        p = self.points
        return [(y2 - y1) / (x2 - x1) for (x1, y1), (x2, y2) in zip(p, p[1:])]

    def __call__(self, x) -> Fraction:
        x = as_fraction(x)
        p = self.points
        for (x1, y1), (x2, y2) in zip(p, p[1:]):
            if x <= x2:
                return y1 + (y2 - y1) * (x - x1) / (x2 - x1)
        (x1, y1), (x2, y2) = p[-2], p[-1]
        return y2 + (y2 - y1) / (x2 - x1) * (x - x2)

    def is_increasing(self) -> bool:
        return all(s > 0 for s in self.slopes())

    def is_concave(self) -> bool:
        s = self.slopes()
        return all(b <= a for a, b in zip(s, s[1:]))

    def lines(self) -> list[tuple[Fraction, Fraction]]:
        """Affine pieces ``(slope, intercept)``; their minimum is ``f`` when concave."""
        out = []
        for (x1, y1), (x2, y2) in zip(self.points, self.points[1:]):
            a = (y2 - y1) / (x2 - x1)
            out.append((a, y1 - a * x1))
        return out


@dataclass(frozen=True)
class Utilitarian:
    v: Mapping

    def value(self, Q: Interim, inst: Instance) -> Fraction:
        return sum((Q[k] * inst.key_mass[k] * as_fraction(self.v.get(k, 0)) for k in inst.tstar), ZERO)


@dataclass(frozen=True)
class RankDependent:
    v: Mapping
    f: PiecewiseLinear

    def order(self, inst: Instance) -> list:
        return sorted(inst.tstar, key=lambda k: -as_fraction(self.v.get(k, 0)))

    def value(self, Q: Interim, inst: Instance) -> Fraction:
        keys = self.order(inst)
        vs = [as_fraction(self.v.get(k, 0)) for k in keys]
        total = ZERO
        acc = ZERO
        for k in range(len(keys) - 1):
            acc += Q[keys[k]] * inst.key_mass[keys[k]]
            total += (vs[k] - vs[k + 1]) * self.f(acc)
        return total


@dataclass(frozen=True)
class MaxMin:
    W: tuple

    def value(self, Q: Interim, inst: Instance) -> Fraction:
        return min(Utilitarian(w).value(Q, inst) for w in self.W)


def evaluate_objective(obj, Q: Interim, inst: Instance) -> Fraction:
    return obj.value(Q, inst)


def comonotone(w1: Mapping, w2: Mapping, keys: Sequence) -> Optional[tuple]:
    """First adjacent pair the two weight functions order strictly oppositely.

    Sort by ``w1`` descending with ties by ``w2`` descending; the pair is
    comonotone iff ``w2`` is then nonincreasing, and any rise in ``w2`` sits
    on a strict drop in ``w1``.
    """
    f1 = {k: as_fraction(w1.get(k, 0)) for k in keys}
    f2 = {k: as_fraction(w2.get(k, 0)) for k in keys}
    ks = sorted(keys, key=lambda k: (-f1[k], -f2[k]))
    for a, b in zip(ks, ks[1:]):
        if f2[a] < f2[b]:
            return a, b
    return None


def _decreasing_along(w: Mapping, p: PriorityOrder) -> Optional[tuple]:
    vals = [as_fraction(w.get(k, 0)) for k in p.keys]
    for j in range(len(vals) - 1):
        if vals[j] < vals[j + 1]:
            return p.keys[j], p.keys[j + 1]
    return None


def monotonicity_certificate(obj, p: PriorityOrder) -> Verdict:
    """Sufficient conditions for the objective to rise with prefix-dominance shifts along ``p``."""
    if isinstance(obj, Utilitarian):
        bad = _decreasing_along(obj.v, p)
        if bad:
            return Verdict(False, bad, {"reason": "weights increase along the priority"})
        if any(as_fraction(obj.v.get(k, 0)) < 0 for k in p.keys):
            return Verdict(False, None, {"reason": "negative weight"})
        return Verdict(True)
    if isinstance(obj, RankDependent):
        bad = _decreasing_along(obj.v, p)
        if bad:
            return Verdict(False, bad, {"reason": "weights increase along the priority"})
        if not obj.f.is_increasing():
            return Verdict(False, None, {"reason": "f not increasing"})
        return Verdict(True)
    if isinstance(obj, MaxMin):
        for w in obj.W:
            bad = _decreasing_along(w, p)
            if bad:
                return Verdict(False, bad, {"reason": "a weight function increases along the priority"})
            if any(as_fraction(w.get(k, 0)) < 0 for k in p.keys):
                return Verdict(False, None, {"reason": "negative weight"})
        for w1, w2 in itertools.combinations(obj.W, 2):
            bad = comonotone(w1, w2, p.keys)
            if bad:
                return Verdict(False, bad, {"reason": "weight functions not comonotone"})
        return Verdict(True)
    raise TypeError(f"unknown objective {obj!r}")


def full_information_benchmark(obj, inst: Instance) -> Fraction:
    """Best objective value over all realizable interim allocations."""
    poly = MatchingPolytope.for_instance(inst)
    if isinstance(obj, Utilitarian):
        from .cover import support_value
        lam = WeightVector({k: as_fraction(obj.v.get(k, 0)) * inst.key_mass[k] for k in inst.tstar})
        return support_value(lam, inst, poly).value
    from .lp import LE, allocation_program, solve
    prog = allocation_program(inst, poly)
    lp = prog.lp
    mass_expr = {k: prog.interim_expr(k) for k in inst.tstar}  # sum of x = Q(k) mu(k)
    if isinstance(obj, MaxMin):
        z = lp.add_var("z")
        for w in obj.W:
            row = {z: ONE}
            for k in inst.tstar:
                wk = as_fraction(w.get(k, 0))
                for var, c in mass_expr[k].items():
                    row[var] = row.get(var, ZERO) - wk * c
            lp.add_constraint(row, LE, 0)
        lp.set_objective({z: ONE})
        return solve(lp).value
    if isinstance(obj, RankDependent):
        if not obj.f.is_concave():
            raise ValueError("benchmark LP needs concave f")
        keys = obj.order(inst)
        vs = [as_fraction(obj.v.get(k, 0)) for k in keys]
        objective = {}
        acc: dict = {}
        for k in range(len(keys) - 1):
            for var, c in mass_expr[keys[k]].items():
                acc[var] = acc.get(var, ZERO) + c
            coef = vs[k] - vs[k + 1]
            if not coef:
                continue
            s = lp.add_var(("s", k))
            for a, b in obj.f.lines():
                row = {s: ONE}
                for var, c in acc.items():
                    row[var] = row.get(var, ZERO) - a * c
                lp.add_constraint(row, LE, b)
            objective[s] = coef
        lp.set_objective(objective)
        return solve(lp).value
    raise TypeError(f"unknown objective {obj!r}")


def da_guarantee_check(obj, p: PriorityOrder, inst: Instance) -> Verdict:
    """``V(Q^p) / benchmark`` and whether it is at least one half.

    The ratio is 1 when the benchmark is 0.
    """
    cert = monotonicity_certificate(obj, p)
    if not cert:
        raise ValueError(f"objective not monotone along the priority: {cert.info}")
    QR = greedy_matching(p, inst)[1]
    got = obj.value(QR, inst)
    bench = full_information_benchmark(obj, inst)
    ratio = got / bench if bench else ONE
    return Verdict(ratio >= Fraction(1, 2), ratio, {"value": got, "benchmark": bench})
