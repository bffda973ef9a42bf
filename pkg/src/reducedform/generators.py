"""Seeded random instances, allocation rules and priorities for fuzzing."""
from __future__ import annotations

import itertools
import random
from fractions import Fraction

from .border import PriorityOrder, greedy_allocation
from .core import AllocationRule, Instance, Interim, Prior, interim_of
from .polytopes import ConstraintFunction, MatchingPolytope, partial_matchings


def random_probs(rng: random.Random, n: int, lo: int = 1, hi: int = 6) -> list[Fraction]:
    w = [rng.randint(lo, hi) for _ in range(n)]
    s = sum(w)
    return [Fraction(x, s) for x in w]


def random_prior(rng: random.Random, type_sets, independent: bool = True) -> Prior:
    """Full-support prior; product of random marginals or a random joint table."""
    if independent:
        return Prior.product([dict(zip(ts, random_probs(rng, len(ts)))) for ts in type_sets])
    states = list(itertools.product(*type_sets))
    return Prior(type_sets, dict(zip(states, random_probs(rng, len(states)))))


def random_general_instance(rng: random.Random, n_units: int = 2, n_types: int = 2,
                            independent: bool = True) -> Instance:
    units = [f"u{k + 1}" for k in range(n_units)]
    types = [[f"t{j + 1}" for j in range(n_types)] for _ in units]
    return Instance.general(units, random_prior(rng, types, independent))


def random_submodular(rng: random.Random, inst: Instance, n_budgets: int = 2,
                      state_dependent: bool = True, hi: int = 3) -> ConstraintFunction:
    """Budget-additive ``C(A, t) = sum_j min(cap_j, w_j(A))`` with random data per state."""
    n = inst.n_coords

    def draw():
        return [(Fraction(rng.randint(1, 2 * hi), 2),
                 [Fraction(rng.randint(0, hi), 2) for _ in range(n)]) for _ in range(n_budgets)]
    if not state_dependent:
        data = draw()
        return ConstraintFunction.budget_additive(lambda t: data, n, True)
    table = {t: draw() for t in inst.states}
    return ConstraintFunction.budget_additive(lambda t: table[t], n, False)


def random_matching_instance(rng: random.Random, n_agents: int = 2, n_items: int = 2,
                             n_types: int = 2, independent: bool = True) -> Instance:
    """Ordinal types are rankings of the items (all items acceptable)."""
    agents = [f"i{k + 1}" for k in range(n_agents)]
    items = [f"n{k + 1}" for k in range(n_items)]
    perms = list(itertools.permutations(items))
    types = [rng.sample(perms, min(n_types, len(perms))) for _ in agents]
    return Instance.matching(agents, items, random_prior(rng, types, independent))


def _mixture(rng, vertices, k_max=3):
    picks = [rng.choice(vertices) for _ in range(rng.randint(1, k_max))]
    w = random_probs(rng, len(picks))
    dim = len(picks[0])
    return tuple(sum((wi * v[c] for wi, v in zip(w, picks)), Fraction(0)) for c in range(dim))


def random_feasible_rule(rng: random.Random, inst: Instance, poly=None) -> AllocationRule:
    """State-wise random convex combination of polytope vertices."""
    if inst.kind == "matching" and poly is None:
        poly = MatchingPolytope.for_instance(inst)
    table = {}
    for t in inst.states:
        table[t] = _mixture(rng, poly.extreme_points(t))
    return AllocationRule(inst.n_coords, table)


def random_integral_matching_rule(rng: random.Random, inst: Instance) -> AllocationRule:
    n_i, n_n = len(inst.carriers), len(inst.items)
    ms = partial_matchings(n_i, n_n)
    table = {}
    for t in inst.states:
        vec = [Fraction(0)] * inst.n_coords
        for i, n in rng.choice(ms):
            vec[i * n_n + n] = Fraction(1)
        table[t] = tuple(vec)
    return AllocationRule(inst.n_coords, table)


def random_realizable_interim(rng: random.Random, inst: Instance, poly=None) -> Interim:
    return interim_of(random_feasible_rule(rng, inst, poly), inst)


def random_interims(rng: random.Random, inst: Instance, poly, count: int,
                    grid: int = 6) -> list[Interim]:
    """Half induced by random feasible rules or greedy points, half grid noise around them."""
    out = []
    for j in range(count):
        if j % 2 == 0:
            out.append(random_realizable_interim(rng, inst, poly))
        else:
            base = random_realizable_interim(rng, inst, poly)
            out.append(Interim({k: max(Fraction(0), min(Fraction(1), base[k] + Fraction(rng.randint(-2, 2), grid)))
                                for k in inst.tstar}))
    return out


def random_greedy_point(rng: random.Random, inst: Instance, C: ConstraintFunction) -> Interim:
    R = PriorityOrder.shuffled(inst, rng)
    k = rng.randint(0, len(R))
    return greedy_allocation(inst, C, R, k)[1]


def random_interleaving_priority(rng: random.Random, inst: Instance):
    """Random merge of each agent-type preference list (welfarist by construction)."""
    from .da import PrincipalPriority
    lists = []
    for k, i in enumerate(inst.carriers):
        for tau in inst.type_sets[k]:
            if inst.prior.marginal(k, tau):
                lists.append([(i, tau, n) for n in tau])
    keys = []
    while any(lists):
        live = [L for L in lists if L]
        keys.append(rng.choice(live).pop(0))
    return PrincipalPriority(inst, keys)


def random_welfarist_irc_priority(rng: random.Random, inst: Instance, tries: int = 200):
    """Rejection-sample interleavings until one is welfarist and item-ranking consistent.

    Falls back to a lexicographic priority with a random agent order.
    """
    from .da import is_item_ranking_consistent, is_welfarist, lexicographic_priority
    for _ in range(tries):
        p = random_interleaving_priority(rng, inst)
        if is_welfarist(p, inst) and is_item_ranking_consistent(p, inst):
            return p
    return lexicographic_priority(inst, rng.sample(list(inst.carriers), len(inst.carriers)))


def monotone_weights(rng: random.Random, p: PriorityOrder, hi: int = 4) -> dict:
    """Nonnegative weights nonincreasing along ``p``."""
    v = {}
    cur = Fraction(rng.randint(len(p), hi * len(p)))
    for key in p.keys:
        v[key] = cur
        cur = max(Fraction(0), cur - Fraction(rng.randint(0, hi), 2))
    return v


def random_cardinal_space(rng: random.Random, n_agents: int = 2, n_items: int = 2,
                          n_verticals: int = 2, uniform: bool = True, independent: bool = True,
                          all_rankings: bool = True, max_tries: int = 500):
    """Regular cardinal space on a unit-spaced vertical grid.

    ``uniform`` uses permutations of 1..N with equal probability; otherwise
    horizontal masses are random. ``independent=False`` draws a random joint
    table of ``(v, h)`` per agent.
    """
    from .cardinal import CardinalAgent, CardinalTypeSpace, permutation_horizontals
    perms = permutation_horizontals(n_items)
    for _ in range(max_tries):
        agents = []
        for _ in range(n_agents):
            base = rng.randint(1, 3)
            vs = [Fraction(base + j) for j in range(n_verticals)]
            hs = perms if all_rankings else rng.sample(perms, rng.randint(1, len(perms)))
            if independent:
                fv = dict(zip(vs, random_probs(rng, len(vs))))
                gh = dict(zip(hs, [Fraction(1, len(hs))] * len(hs) if uniform else random_probs(rng, len(hs))))
                agents.append(CardinalAgent.independent(fv, gh))
            else:
                cells = [(v, h) for v in vs for h in hs]
                agents.append(CardinalAgent(tuple(vs), tuple(hs), dict(zip(cells, random_probs(rng, len(cells))))))
        space = CardinalTypeSpace(tuple(f"n{k + 1}" for k in range(n_items)), tuple(agents))
        if space.is_regular():
            return space
    raise RuntimeError("no regular cardinal space found")


def shuffled_order(rng: random.Random, inst: Instance) -> PriorityOrder:
    return PriorityOrder.shuffled(inst, rng)



def random_halfbound_case(rng: random.Random, n_agents: int = 3, n_items: int = 3,
                          density: float = 0.5) -> tuple[set, set]:
    """Integral matching ``rho`` and a pair set covered by its projection."""
    rho = set(rng.choice(partial_matchings(n_agents, n_items)))
    core = {p for p in rho if rng.random() < 0.8} or set(rho)
    rows = {i for i, _ in core}
    cols = {n for _, n in core}
    a = set(core)
    for i in range(n_agents):
        for n in range(n_items):
            if (i in rows or n in cols) and rng.random() < density:
                a.add((i, n))
    return rho, a
