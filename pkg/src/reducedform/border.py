"""Exact characterization under polymatroid constraints.

The greedy algorithm on a submodular constraint function yields the extreme
points of the ex-post polytope, and an interim allocation is realizable iff
every aggregate Border inequality

    sum_{key in A} Q(key) mu(key) <= sum_t mu(t) C(S(A, t), t)

holds. ``subset_scan`` evaluates all of them in one Gray-code pass and is
shared with the matching module, which plugs in matching capacities.
"""
from __future__ import annotations

import itertools
import math
import random
from collections.abc import Callable, Iterable, Iterator, Sequence
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from .core import (
    ZERO, AllocationRule, CapExceeded, Instance, Interim, Key, State, Verdict,
    WeightVector, interim_of, prefix_masses,
)
from .polytopes import ConstraintFunction

DEFAULT_MAX_TSTAR = 22


class PriorityOrder:
    """Strict total order on TStar, stored highest first."""

    __slots__ = ("keys", "pos")

    def __init__(self, inst: Instance, keys: Iterable[Key]):
        keys = tuple(tuple(k) for k in keys)
        if len(keys) != len(inst.tstar) or set(keys) != set(inst.tstar):
            raise ValueError("priority order must be a permutation of TStar")
        self.keys = keys
        self.pos = {k: j for j, k in enumerate(keys)}

    def __len__(self):
        return len(self.keys)

    def __iter__(self):
        return iter(self.keys)

    def __eq__(self, other):
        return isinstance(other, PriorityOrder) and self.keys == other.keys

    def __hash__(self):
        return hash(self.keys)

    def __repr__(self):
        return f"PriorityOrder({list(self.keys)!r})"

    def upper(self, k: int) -> frozenset:
        return frozenset(self.keys[:k])

    def is_upper_set(self, A: Iterable[Key]) -> bool:
        A = set(A)
        return A == set(self.keys[:len(A)])

    def ranks_above(self, a: Key, b: Key) -> bool:
        return self.pos[a] < self.pos[b]

    def state_order(self, inst: Instance, t: State, A=None) -> list[int]:
        """Coordinates whose realized key lies in ``A`` (default all), by rank."""
        cs = []
        for c in range(inst.n_coords):
            key = inst.key(c, t)
            if key in self.pos and (A is None or key in A):
                cs.append(c)
        cs.sort(key=lambda c: self.pos[inst.key(c, t)])
        return cs

    @classmethod
    def identity(cls, inst: Instance) -> "PriorityOrder":
        return cls(inst, inst.tstar)

    @classmethod
    def shuffled(cls, inst: Instance, rng: random.Random) -> "PriorityOrder":
        keys = list(inst.tstar)
        rng.shuffle(keys)
        return cls(inst, keys)

    @classmethod
    def all_orders(cls, inst: Instance) -> Iterator["PriorityOrder"]:
        for perm in itertools.permutations(inst.tstar):
            yield cls(inst, perm)

    @classmethod
    def by_weight(cls, inst: Instance, weight, normalize: bool = True) -> "PriorityOrder":
        """Decreasing in ``weight(key)`` (divided by mu(key) if ``normalize``).

        Ties keep TStar order.
        """
        def score(key):
            w = weight[key] if not callable(weight) else weight(key)
            return w / inst.key_mass[key] if normalize else w
        return cls(inst, sorted(inst.tstar, key=lambda k: -score(k)))


def is_submodular(C: ConstraintFunction, t: State = None) -> Verdict:
    """Submodularity of ``C(., t)``; the witness is a violating pair ``(A, B)``.

    The pair comes from the local exchange test and uses unit positions.
    """
    v = C.submodularity_violation(t)
    if v is None:
        return Verdict(True)
    a, b = v
    A = frozenset(u for u in range(C.n) if a >> u & 1)
    B = frozenset(u for u in range(C.n) if b >> u & 1)
    info = {"C(A)": C.value(a, t), "C(B)": C.value(b, t),
            "C(A|B)": C.value(a | b, t), "C(A&B)": C.value(a & b, t)}
    return Verdict(False, (A, B), info)


def greedy_polymatroid(C: ConstraintFunction, t: State, unit_order: Sequence[int]) -> tuple:
    return C.greedy(t, unit_order)


def greedy_allocation(inst: Instance, C: ConstraintFunction, R: PriorityOrder,
                      A: Optional[Iterable[Key]] = None) -> tuple[AllocationRule, Interim]:
    """Truncated greedy allocation q^(A,R) and its interim allocation.

    ``A`` defaults to all of TStar; an int is read as the top-``A`` prefix.
    """
    if isinstance(A, int):
        A = R.upper(A)
    elif A is not None:
        A = frozenset(A)
    table = {}
    for t in inst.states:
        table[t] = C.greedy(t, R.state_order(inst, t, A))
    q = AllocationRule(inst.n_coords, table)
    return q, interim_of(q, inst)


@dataclass(frozen=True)
class ScanResult:
    worst: Optional[frozenset]
    lhs: Fraction
    rhs: Fraction
    subsets: int

    @property
    def ok(self) -> bool:
        return self.worst is None


def subset_scan(inst: Instance, weights: Sequence[Fraction],
                capacity: Callable[[int, int], Fraction],
                max_tstar: int = DEFAULT_MAX_TSTAR) -> ScanResult:
    """Scan every ``A`` within TStar for ``sum_A weights > sum_t mu(t) cap(S(A,t), t)``.

    ``capacity(mask, s)`` takes a coordinate bitmask and a state index.
    Large scans run on int64 arrays when the integer-scaled values provably
    fit; otherwise subsets are visited in Gray-code order so each step
    toggles one key and touches only the states realizing it. Returns the
    subset with the largest violation, if any.
    """
    keys = inst.tstar
    n = len(keys)
    if n > max_tstar:
        raise CapExceeded(f"|TStar| = {n} exceeds cap {max_tstar}")
    states = inst.states
    # integers over a common denominator keep the inner loop off Fraction
    probs = [inst.prior.prob(t) for t in states]
    L = math.lcm(*(x.denominator for x in itertools.chain(weights, probs)))
    w_int = [int(x * L) for x in weights]
    p_int = [int(x * L) for x in probs]
    if n >= VECTOR_MIN_TSTAR:
        res = _vector_scan(inst, keys, w_int, p_int, capacity, L)
        if res is not None:
            return res
    touch = []
    for key in keys:
        c = inst.key_coord(key)
        k = inst.key_carrier(key)
        touch.append((1 << c, [s for s, t in enumerate(states) if t[k] == key[1]]))
    masks = [0] * len(states)
    caps = [0] * len(states)
    lhs = rhs = 0
    A = 0
    best_gap, best_A, best_lr = 0, None, (0, 0)
    for g in range(1, 1 << n):
        j = (g & -g).bit_length() - 1
        A ^= 1 << j
        bit, ss = touch[j]
        lhs = lhs + w_int[j] if A >> j & 1 else lhs - w_int[j]
        for s in ss:
            masks[s] ^= bit
            new = capacity(masks[s], s)
            if new.denominator == 1:
                new = new.numerator
            if new != caps[s]:
                rhs += p_int[s] * (new - caps[s])
                caps[s] = new
        gap = lhs - rhs
        if gap > best_gap:
            best_gap, best_A, best_lr = gap, A, (lhs, rhs)
    if best_A is None:
        return ScanResult(None, ZERO, ZERO, (1 << n) - 1)
    worst = frozenset(keys[j] for j in range(n) if best_A >> j & 1)
    return ScanResult(worst, Fraction(best_lr[0]) / L, Fraction(best_lr[1]) / L, (1 << n) - 1)


VECTOR_MIN_TSTAR = 10
_CHUNK = 1 << 18


def _vector_scan(inst, keys, w_int, p_int, capacity, L) -> Optional[ScanResult]:
    """Whole-lattice evaluation with int64 arrays; None if values could overflow."""
    n = len(keys)
    states = inst.states
    tables, members = [], []
    for s, t in enumerate(states):
        mem = []
        for j, key in enumerate(keys):
            k = inst.key_carrier(key)
            if t[k] == key[1]:
                mem.append((j, 1 << inst.key_coord(key)))
        table = []
        for sub in range(1 << len(mem)):
            mask = 0
            for b, (_, bit) in enumerate(mem):
                if sub >> b & 1:
                    mask |= bit
            c = capacity(mask, s)
            if c.denominator != 1:
                return None
            table.append(c.numerator)
        tables.append(np.array(table, dtype=np.int64))
        members.append([j for j, _ in mem])
    bound = sum(abs(w) for w in w_int) + sum(p * int(tb.max(initial=0)) for p, tb in zip(p_int, tables))
    if bound >= 1 << 62:
        return None
    w = np.array(w_int, dtype=np.int64)
    best_gap, best_A, best_lr = 0, None, (0, 0)
    total = 1 << n
    for lo in range(0, total, _CHUNK):
        A = np.arange(lo, min(total, lo + _CHUNK), dtype=np.int64)
        lhs = np.zeros(len(A), dtype=np.int64)
        for j in range(n):
            lhs += ((A >> j) & 1) * w[j]
        rhs = np.zeros(len(A), dtype=np.int64)
        for s, mem in enumerate(members):
            idx = np.zeros(len(A), dtype=np.int64)
            for b, j in enumerate(mem):
                idx |= ((A >> j) & 1) << b
            rhs += p_int[s] * tables[s][idx]
        gap = lhs - rhs
        m = int(gap.argmax())
        if gap[m] > best_gap:
            best_gap, best_A, best_lr = int(gap[m]), int(A[m]), (int(lhs[m]), int(rhs[m]))
    if best_A is None:
        return ScanResult(None, ZERO, ZERO, total - 1)
    worst = frozenset(keys[j] for j in range(n) if best_A >> j & 1)
    return ScanResult(worst, Fraction(best_lr[0], L), Fraction(best_lr[1], L), total - 1)


def border_rhs(inst: Instance, C: ConstraintFunction, A: Iterable[Key]) -> Fraction:
    """``sum_t mu(t) C(S(A, t), t)`` for one set ``A``."""
    from .core import active_mask
    A = set(A)
    return sum((inst.prior.prob(t) * C.value(active_mask(inst, A, t), t) for t in inst.states), ZERO)


def border_check(Q: Interim, inst: Instance, C: ConstraintFunction,
                 max_tstar: int = DEFAULT_MAX_TSTAR) -> Verdict:
    """All Border inequalities; the witness is the worst violating set."""
    states = inst.states
    res = subset_scan(inst, Q.weighted(inst), lambda m, s: C.value(m, states[s]), max_tstar)
    if res.ok:
        return Verdict(True, info={"subsets": res.subsets})
    return Verdict(False, res.worst, {"lhs": res.lhs, "rhs": res.rhs, "subsets": res.subsets})


def r_fosd_dominates(Qhi: Interim, Qlo: Interim, R: PriorityOrder, inst: Instance) -> Verdict:
    """Prefix dominance along ``R``; the witness is the first failing prefix length."""
    hi = prefix_masses(Qhi, R.keys, inst)
    lo = prefix_masses(Qlo, R.keys, inst)
    for j in range(1, len(hi)):
        if lo[j] > hi[j]:
            return Verdict(False, j, {"hi": hi[j], "lo": lo[j]})
    return Verdict(True)


def step_lambda(inst: Instance, A: Iterable[Key], R: Optional[PriorityOrder] = None) -> WeightVector:
    """Indicator weight with ``lambda(key)/mu(key) = 1`` on ``A`` and 0 elsewhere.

    With this scaling ``lambda(Q)`` is the ex-ante mass of ``Q`` on ``A`` and
    the state-wise weights are 0/1 indicators. If ``R`` is given, ``A`` must
    be an upper set of it.
    """
    A = frozenset(A)
    if R is not None and not R.is_upper_set(A):
        raise ValueError("set is not an upper set of the order")
    for key in A:
        if key not in inst.key_mass:
            raise ValueError(f"{key!r} is not in TStar")
    return WeightVector({key: inst.key_mass[key] for key in A})


def ordinally_equivalent(inst: Instance, lam1: WeightVector, lam2: WeightVector) -> bool:
    """Same nonnegativity set and a common order of normalized weights on it."""
    pos1 = {k for k in inst.tstar if lam1[k] >= 0}
    pos2 = {k for k in inst.tstar if lam2[k] >= 0}
    if pos1 != pos2:
        return False
    ks = sorted(pos1, key=inst.key_index.get)
    for a, b in itertools.combinations(ks, 2):
        d1 = lam1[a] / inst.key_mass[a] - lam1[b] / inst.key_mass[b]
        d2 = lam2[a] / inst.key_mass[a] - lam2[b] / inst.key_mass[b]
        if (d1 > 0 and d2 < 0) or (d1 < 0 and d2 > 0):
            return False
    return True


def greedy_for_weights(inst: Instance, C: ConstraintFunction, lam: WeightVector) -> AllocationRule:
    """Greedy allocation driven by ``lambda``: order by normalized weight, skip negatives."""
    R = PriorityOrder.by_weight(inst, lam)
    A = frozenset(k for k in inst.tstar if lam[k] >= 0)
    return greedy_allocation(inst, C, R, A)[0]
