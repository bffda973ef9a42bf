"""Support functions and approximation covers.

``support_value`` maximizes a linear functional over the realizable set by
solving one ex-post problem per state. A cover is a list of realizable
interim points, each paired with the extreme weight vectors of a cone it is
claimed to be alpha-optimal for; ``validate_cover`` checks that claim and
``approx_membership`` runs the induced characterization.

Cover constructors build entries for truncated greedy points along every
priority order. For the entry truncated at ``k`` the cone is spanned by the
vectors that are +1 (normalized) on the top ``j`` keys, 0 on ranks
``j+1..m`` and -1 below ``m``, for ``j <= k <= m``.
"""
from __future__ import annotations

import random
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .border import PriorityOrder, greedy_allocation
from .core import (
    ZERO, AllocationRule, Instance, Interim, State, Verdict, WeightVector,
    as_fraction, interim_of,
)

MAX_ORDER_ENUMERATION = 8


@dataclass(frozen=True)
class SupportValue:
    value: Fraction
    allocation: AllocationRule


class SupportCache:
    """Memo of support values keyed by weight vector, for one instance/polytope."""

    def __init__(self, inst: Instance, poly):
        self.inst = inst
        self.poly = poly
        self._memo: dict = {}

    def __call__(self, lam: WeightVector) -> Fraction:
        v = self._memo.get(lam)
        if v is None:
            v = support_value(lam, self.inst, self.poly).value
            self._memo[lam] = v
        return v


def support_value(lam: WeightVector, inst: Instance, poly) -> SupportValue:
    """``max over realizable Q' of lambda(Q')`` via per-state maximization."""
    total = ZERO
    table = {}
    for t in inst.states:
        gamma = lam.conditional(inst, t)
        if any(g > 0 for g in gamma):
            v, rho = poly.maximize(t, gamma)
            total += inst.prior.prob(t) * v
            table[t] = rho
    return SupportValue(total, AllocationRule(inst.n_coords, table))


def support_value_lp(lam: WeightVector, inst: Instance, poly) -> Fraction:
    """The same maximum from one ex-ante LP over all states jointly."""
    from .lp import allocation_program, solve
    prog = allocation_program(inst, poly)
    obj = {}
    for key, w in lam.items():
        for v, coef in prog.interim_expr(key).items():
            obj[v] = obj.get(v, ZERO) + coef * w / inst.key_mass[key]
    prog.lp.set_objective(obj)
    res = solve(prog.lp)
    return res.value


@dataclass
class CoverEntry:
    point: Interim
    lambdas: list
    witness: Optional[AllocationRule] = None
    label: object = None


@dataclass
class CoverCandidate:
    alpha: Fraction
    entries: list = field(default_factory=list)

    def __post_init__(self):
        self.alpha = as_fraction(self.alpha)
        if not 0 < self.alpha <= 1:
            raise ValueError("cover factor must lie in (0, 1]")

    def all_lambdas(self) -> list[WeightVector]:
        seen = {}
        for e in self.entries:
            for lam in e.lambdas:
                seen.setdefault(lam, None)
        return list(seen)


def validate_cover(c: CoverCandidate, inst: Instance, poly,
                   support: Optional[SupportCache] = None) -> Verdict:
    """Every listed extreme weight satisfies ``lambda(Q_j) >= alpha * support(lambda)``.

    Witness on failure is ``(entry index, lambda)``.
    """
    support = support or SupportCache(inst, poly)
    checked = 0
    for j, e in enumerate(c.entries):
        if not e.lambdas:
            raise ValueError(f"cover entry {j} lists no extreme weights")
        for lam in e.lambdas:
            checked += 1
            s = support(lam)
            if lam(e.point) < c.alpha * s:
                return Verdict(False, (j, lam), {"value": lam(e.point), "support": s})
    return Verdict(True, info={"checked": checked})


def approx_membership(Q: Interim, c: CoverCandidate, inst: Instance, poly,
                      support: Optional[SupportCache] = None) -> Verdict:
    """``lambda(Q) <= support(lambda)`` for every extreme weight of the cover."""
    support = support or SupportCache(inst, poly)
    for lam in c.all_lambdas():
        s = support(lam)
        if lam(Q) > s:
            return Verdict(False, lam, {"value": lam(Q), "support": s})
    return Verdict(True)


# -- cone extremes along an order --------------------------------------

def band_lambda(inst: Instance, R: PriorityOrder, j: int, m: int) -> WeightVector:
    """+mu on the top ``j`` keys, 0 on ranks ``j+1..m``, -mu below ``m``."""
    vals = {}
    for r, key in enumerate(R.keys):
        if r < j:
            vals[key] = inst.key_mass[key]
        elif r >= m:
            vals[key] = -inst.key_mass[key]
    return WeightVector(vals)


def entry_lambdas(inst: Instance, R: PriorityOrder, k: int) -> list[WeightVector]:
    n = len(R)
    return [band_lambda(inst, R, j, m) for j in range(k + 1) for m in range(k, n + 1)]


def orders_for(inst: Instance, orders: Optional[Iterable[PriorityOrder]] = None,
               n_sampled: int = 50, seed: int = 0,
               extra: Sequence[PriorityOrder] = ()) -> list[PriorityOrder]:
    """All orders at desk scale, else a seeded sample plus ``extra`` orders."""
    if orders is not None:
        return list(orders)
    if len(inst.tstar) <= MAX_ORDER_ENUMERATION:
        return list(PriorityOrder.all_orders(inst))
    rng = random.Random(seed)
    out = list(extra)
    for _ in range(n_sampled):
        out.append(PriorityOrder.shuffled(inst, rng))
    return out


def separation_order(inst: Instance, separator: WeightVector) -> PriorityOrder:
    """Order along a separating weight (normalized, decreasing)."""
    return PriorityOrder.by_weight(inst, separator)


def _greedy_cover(inst, alpha, greedy_fn, orders, truncations):
    entries = []
    for R in orders:
        q, QR = greedy_fn(R)
        ks = range(len(R) + 1) if truncations else [len(R)]
        for k in ks:
            top = R.upper(k)
            Qk = Interim({key: v for key, v in QR.items() if key in top})
            entries.append(CoverEntry(Qk, entry_lambdas(inst, R, k), label=(R.keys, k)))
    return CoverCandidate(alpha, entries)


def polymatroid_cover(inst: Instance, C, orders=None, truncations: bool = True) -> CoverCandidate:
    """Equivalence cover (alpha = 1) from truncated greedy allocations."""
    return _greedy_cover(inst, 1, lambda R: greedy_allocation(inst, C, R),
                         orders_for(inst, orders), truncations)


def matching_cover(inst: Instance, orders=None, truncations: bool = True) -> CoverCandidate:
    """Half-approximation cover from truncated greedy matchings."""
    from .matching import greedy_matching
    return _greedy_cover(inst, Fraction(1, 2), lambda R: greedy_matching(R, inst),
                         orders_for(inst, orders), truncations)


# -- lifting ex-post covers --------------------------------------------

@dataclass
class ExPostEntry:
    """A state-wise selection of assignments and the ex-ante weights it serves.

    ``select(t)`` returns the assignment used in state ``t``. Each weight in
    ``lambdas`` must have its conditional weights at every state inside the
    ex-post cone of the selected assignment.
    """

    select: Callable[[State], Sequence[Fraction]]
    lambdas: list
    label: object = None


def lift_expost_cover(inst: Instance, poly, expost: Sequence[ExPostEntry], alpha) -> CoverCandidate:
    """Ex-ante cover whose points are the interim allocations of the selections.

    Checks the ex-post hypothesis ``gamma(rho_t) >= alpha * max gamma`` for the
    conditional weights of every listed lambda at every state.
    """
    alpha = as_fraction(alpha)
    entries = []
    for e in expost:
        q = AllocationRule(inst.n_coords, {t: e.select(t) for t in inst.states})
        for lam in e.lambdas:
            for t in inst.states:
                gamma = lam.conditional(inst, t)
                got = sum((g * r for g, r in zip(gamma, q.at(t))), ZERO)
                best = poly.maximize(t, gamma)[0] if any(g > 0 for g in gamma) else ZERO
                if got < alpha * best:
                    raise ValueError(f"ex-post hypothesis fails at state {t!r} for entry {e.label!r}")
        entries.append(CoverEntry(interim_of(q, inst), list(e.lambdas), q, e.label))
    return CoverCandidate(alpha, entries)


def expost_greedy_entries(inst: Instance, state_greedy: Callable, orders, truncations: bool = True):
    """Ex-post entries from a state-wise greedy ``state_greedy(R, t, k)``."""
    out = []
    for R in orders:
        ks = range(len(R) + 1) if truncations else [len(R)]
        for k in ks:
            out.append(ExPostEntry((lambda R, k: lambda t: state_greedy(R, t, k))(R, k),
                                   entry_lambdas(inst, R, k), (R.keys, k)))
    return out


def cover_points(c: CoverCandidate) -> list[Interim]:
    return [e.point for e in c.entries]


def distinct_lambdas(c: CoverCandidate) -> int:
    return len(c.all_lambdas())
