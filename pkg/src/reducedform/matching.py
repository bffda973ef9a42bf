"""One-to-one matching: greedy matchings, the (BM) condition, half-scaling.

The matching capacity ``C(X)`` (maximum matching size inside a pair set) is
not submodular. The (BM) condition bounds the interim mass on every key set
by its expected matching capacity; it is necessary, and without submodularity
the usual sufficiency argument does not apply. Scaling by one half restores sufficiency; the
routines here check the three forms of that statement and the tightening
that truncates the greedy allocation once enough mass has been assigned.
"""
from __future__ import annotations

import random
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Optional

from .border import DEFAULT_MAX_TSTAR, PriorityOrder, r_fosd_dominates, subset_scan
from .core import (
    ONE, ZERO, AllocationRule, CapExceeded, Instance, Interim, State, Verdict,
    WeightVector, as_fraction, ex_ante_mass, interim_of, prefix_masses, scale,
)
from .polytopes import MatchingPolytope, max_cardinality_matching

HALF = Fraction(1, 2)
MAX_HULL_TSTAR = 5


# -- greedy matching ----------------------------------------------------

def greedy_state(R: PriorityOrder, inst: Instance, t: State,
                 k: Optional[int] = None) -> list[tuple]:
    """Keys accepted in state ``t`` when scanning the top ``k`` of ``R``."""
    keys = R.keys if k is None else R.keys[:k]
    used_i, used_n, accepted = set(), set(), []
    for key in keys:
        i, tau, n = key
        if t[inst.carrier_index(i)] != tau or i in used_i or n in used_n:
            continue
        used_i.add(i)
        used_n.add(n)
        accepted.append(key)
    return accepted


def greedy_vector(R: PriorityOrder, inst: Instance, t: State, k: Optional[int] = None) -> tuple:
    rho = [ZERO] * inst.n_coords
    for key in greedy_state(R, inst, t, k):
        rho[inst.key_coord(key)] = ONE
    return tuple(rho)


def greedy_matching(R: PriorityOrder, inst: Instance,
                    k: Optional[int] = None) -> tuple[AllocationRule, Interim]:
    """The R-greedy matching rule (optionally truncated at ``k``) and its interim."""
    q = AllocationRule(inst.n_coords, {t: greedy_vector(R, inst, t, k) for t in inst.states})
    return q, interim_of(q, inst)


def truncate_greedy(R: PriorityOrder, k: int, inst: Instance) -> Interim:
    if not 0 <= k <= len(R):
        raise ValueError(f"truncation index {k} outside 0..{len(R)}")
    return greedy_matching(R, inst, k)[1]


# -- (BM) -------------------------------------------------------------

@lru_cache(maxsize=1 << 16)
def _capacity(n_items: int, mask: int) -> Fraction:
    edges = []
    c = 0
    m = mask
    while m:
        if m & 1:
            edges.append((c // n_items, c % n_items))
        m >>= 1
        c += 1
    n_left = max((i for i, _ in edges), default=-1) + 1
    return Fraction(max_cardinality_matching(edges, n_left))


def pair_capacity(inst: Instance, mask: int) -> Fraction:
    """Maximum matching size inside a coordinate bitmask."""
    return _capacity(len(inst.items), mask)


def bm_check(Q: Interim, inst: Instance, max_tstar: int = DEFAULT_MAX_TSTAR) -> Verdict:
    """Border inequalities with matching capacities; witness is the worst set."""
    if inst.kind != "matching":
        raise ValueError("bm_check needs a matching instance")
    n_items = len(inst.items)
    res = subset_scan(inst, Q.weighted(inst), lambda m, s: _capacity(n_items, m), max_tstar)
    if res.ok:
        return Verdict(True, info={"subsets": res.subsets})
    return Verdict(False, res.worst, {"lhs": res.lhs, "rhs": res.rhs, "subsets": res.subsets})


def bm_max_scale(Q: Interim, inst: Instance, max_tstar: int = DEFAULT_MAX_TSTAR) -> Fraction:
    """Largest ``s`` in [0, 1] with ``s Q`` satisfying (BM) (exact; 1 if unconstrained)."""
    keys = inst.tstar
    n = len(keys)
    if n > max_tstar:
        raise CapExceeded(f"|TStar| = {n} exceeds cap {max_tstar}")
    w = Q.weighted(inst)
    states = inst.states
    probs = [inst.prior.prob(t) for t in states]
    n_items = len(inst.items)
    touch = []
    for key in keys:
        k = inst.key_carrier(key)
        touch.append((1 << inst.key_coord(key), [s for s, t in enumerate(states) if t[k] == key[1]]))
    masks = [0] * len(states)
    caps = [ZERO] * len(states)
    lhs = rhs = ZERO
    A = 0
    best = ONE
    for g in range(1, 1 << n):
        j = (g & -g).bit_length() - 1
        A ^= 1 << j
        bit, ss = touch[j]
        lhs = lhs + w[j] if A >> j & 1 else lhs - w[j]
        for s in ss:
            masks[s] ^= bit
            new = _capacity(n_items, masks[s])
            rhs += probs[s] * (new - caps[s])
            caps[s] = new
        if lhs > 0 and rhs < best * lhs:
            best = rhs / lhs
    return best


# -- projections and the half bound -------------------------------------

def _matched_pairs(rho) -> set:
    """Matched pairs of an integral assignment given as a pair -> value map or pair set."""
    if isinstance(rho, Mapping):
        pairs = set()
        for pair, v in rho.items():
            v = as_fraction(v)
            if v not in (0, 1):
                raise ValueError(f"assignment is not integral at {pair!r}: {v}")
            if v:
                pairs.add(tuple(pair))
    else:
        pairs = {tuple(p) for p in rho}
    if len({i for i, _ in pairs}) != len(pairs) or len({n for _, n in pairs}) != len(pairs):
        raise ValueError("assignment is not a matching")
    return pairs


def projection(rho, a: Iterable[tuple], within: bool = True) -> set:
    """Rows and columns of the pairs in ``a`` that ``rho`` matches.

    As a set predicate: ``(j, m)`` is in the projection iff some matched
    ``(i, n)`` in ``a`` has ``i == j`` or ``n == m``. ``within=False`` uses
    every matched pair of ``rho`` instead.
    """
    matched = _matched_pairs(rho)
    if within:
        matched &= {tuple(p) for p in a}
    rows = {i for i, _ in matched}
    cols = {n for _, n in matched}
    return {"rows": rows, "cols": cols, "matched": matched}


def projection_covers(rho, a: Iterable[tuple], within: bool = True) -> bool:
    a = {tuple(p) for p in a}
    pr = projection(rho, a, within)
    return all(i in pr["rows"] or n in pr["cols"] for i, n in a)


def pair_set_capacity(a: Iterable[tuple]) -> Fraction:
    a = sorted({tuple(p) for p in a}, key=repr)
    left = {i: k for k, i in enumerate(sorted({i for i, _ in a}, key=repr))}
    right = {n: k for k, n in enumerate(sorted({n for _, n in a}, key=repr))}
    return Fraction(max_cardinality_matching([(left[i], right[n]) for i, n in a], len(left)))


def halfbound_check(rho, a: Iterable[tuple], strict: bool = True) -> Verdict:
    """``sum_{a} rho >= capacity(a) / 2`` for a matching whose projection covers ``a``.

    With ``strict=False`` an uncovered pair set is evaluated anyway and
    ``info["covers"]`` records the coverage.
    """
    a = {tuple(p) for p in a}
    covers = projection_covers(rho, a)
    if strict and not covers:
        raise ValueError("projection of the assignment does not cover the pair set")
    got = Fraction(len(_matched_pairs(rho) & a))
    cap = pair_set_capacity(a)
    return Verdict(got >= cap / 2, info={"mass": got, "capacity": cap, "covers": covers})


# -- the half characterization -------------------------------------------

def adversarial_orders(Q: Interim, inst: Instance) -> list[PriorityOrder]:
    """Order along the lp-oracle separator of ``Q`` when ``Q`` is unrealizable."""
    from .lp import realizable
    r = realizable(Q, inst, MatchingPolytope.for_instance(inst))
    if r.feasible or not r.separator:
        return []
    return [PriorityOrder.by_weight(inst, WeightVector(r.separator))]


def half_char_verify(Q: Interim, inst: Instance, mode: str, orders=None,
                     n_sampled: int = 50, seed: int = 0,
                     max_hull_tstar: int = MAX_HULL_TSTAR) -> Verdict:
    """Check one of the three half-scaling conclusions for ``Q``.

    ``fosd_all_orders``: every order's greedy matching dominates Q/2 along it.
    ``convex_hull_lp``: Q/2 is a convex combination of truncated greedy points.
    ``realizable_half``: Q/2 is realizable (witness rule in ``info``).
    """
    from .cover import orders_for
    from .lp import EQ, LinearProgram, realizable, solve
    half = scale(Q, HALF)
    if mode == "fosd_all_orders":
        extra = adversarial_orders(Q, inst) if len(inst.tstar) > 8 else []
        checked = 0
        for R in orders_for(inst, orders, n_sampled, seed, extra):
            QR = greedy_matching(R, inst)[1]
            v = r_fosd_dominates(QR, half, R, inst)
            checked += 1
            if not v:
                return Verdict(False, (R.keys, v.witness), v.info)
        return Verdict(True, info={"orders": checked})
    if mode == "convex_hull_lp":
        if len(inst.tstar) > max_hull_tstar and orders is None:
            raise CapExceeded(f"|TStar| = {len(inst.tstar)} exceeds hull cap {max_hull_tstar}")
        points = {}
        for R in orders_for(inst, orders, n_sampled, seed):
            QR = greedy_matching(R, inst)[1]
            for k in range(len(R) + 1):
                top = R.upper(k)
                P = Interim({key: v for key, v in QR.items() if key in top})
                points.setdefault(P, (R.keys, k))
        pts = list(points)
        lp = LinearProgram()
        ws = [lp.add_var(points[P]) for P in pts]
        lp.add_constraint({w: 1 for w in ws}, EQ, 1)
        for key in inst.tstar:
            lp.add_constraint({w: P[key] for w, P in zip(ws, pts) if P[key]}, EQ, half[key])
        res = solve(lp)
        if res.status != "optimal":
            return Verdict(False, res.certificate.multipliers, {"points": len(pts)})
        x = res.certificate.values
        combo = [(points[P], x[w]) for w, P in zip(ws, pts) if x[w]]
        return Verdict(True, combo, {"points": len(pts)})
    if mode == "realizable_half":
        r = realizable(half, inst, MatchingPolytope.for_instance(inst))
        if r.feasible:
            return Verdict(True, r.allocation)
        return Verdict(False, r.separator, {"value": r.separator_value, "bound": r.separator_bound})
    raise ValueError(f"unknown mode {mode!r}")


# -- tightening -------------------------------------------------------------

@dataclass(frozen=True)
class TighteningResult:
    alpha: Fraction
    ell: int
    Qhat: Interim
    greedy: Interim


def tighten(Q: Interim, R: PriorityOrder, inst: Instance) -> TighteningResult:
    """Truncate the R-greedy interim once it carries ``alpha`` of its mass.

    ``alpha`` solves ``mass(Q) / 2 = alpha * mass(Q^R)``; ``ell`` is the
    smallest prefix length reaching ``alpha * mass(Q^R)``.
    """
    QR = greedy_matching(R, inst)[1]
    total_R = ex_ante_mass(QR, inst)
    total = ex_ante_mass(Q, inst)
    if total_R == 0:
        if total > 0:
            raise ValueError("greedy allocation is null but Q is not")
        return TighteningResult(ZERO, 0, Interim(), QR)
    alpha = total / 2 / total_R
    pm = prefix_masses(QR, R.keys, inst)
    target = alpha * total_R
    ell = next(j for j, m in enumerate(pm) if m >= target)
    top = R.upper(ell)
    Qhat = Interim({key: v for key, v in QR.items() if key in top})
    return TighteningResult(alpha, ell, Qhat, QR)


def partial_fosd_truncation(F: Sequence, alpha) -> tuple[list[Fraction], int]:
    """Keep the atoms of ``F`` up to the first index where ``F`` reaches ``alpha * total``.

    Atoms are listed from the bottom of the order up; the atom at the cut is
    kept whole. Returns the truncated measure and the cut index.
    """
    F = [as_fraction(x) for x in F]
    alpha = as_fraction(alpha)
    target = alpha * sum(F, ZERO)
    acc = ZERO
    for j, x in enumerate(F):
        acc += x
        if acc >= target:
            return F[:j + 1] + [ZERO] * (len(F) - j - 1), j
    return list(F), len(F) - 1


def cdf_dominates(F: Sequence, G: Sequence) -> Verdict:
    """``F([0, z]) >= G([0, z])`` at every atom; witness is the first failing index."""
    a = b = ZERO
    for j, (x, y) in enumerate(zip(F, G)):
        a += as_fraction(x)
        b += as_fraction(y)
        if a < b:
            return Verdict(False, j, {"F": a, "G": b})
    return Verdict(True)


# -- sampling -------------------------------------------------------------

def random_grid_interim(inst: Instance, rng: random.Random, grid: int = 8) -> Interim:
    return Interim({key: Fraction(rng.randint(0, grid), grid) for key in inst.tstar})


def sample_bm_feasible(inst: Instance, rng: random.Random, count: int, grid: int = 8,
                       max_tries: int = 10_000, to_frontier: bool = False) -> tuple[list[Interim], int]:
    """Rejection-sample grid interims that satisfy (BM).

    With ``to_frontier`` each draw is rescaled by its largest (BM)-feasible
    factor, which puts it on the boundary where realizability gaps live.
    Returns the accepted samples and the number of draws used.
    """
    out = []
    tries = 0
    while len(out) < count and tries < max_tries:
        tries += 1
        Q = random_grid_interim(inst, rng, grid)
        if to_frontier:
            s = bm_max_scale(Q, inst)
            Q = Q.scaled(s)
            out.append(Q)
        elif bm_check(Q, inst):
            out.append(Q)
    return out, tries
