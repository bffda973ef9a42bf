"""Ex-post assignment polytopes.

Three variants share one small interface (``contains``, ``maximize``,
``halfspaces``, ``extreme_points``), all over the instance's coordinate
order:

* :class:`Polymatroid` -- ``{rho >= 0 : sum_{u in A} rho(u) <= C(A, t)}``,
* :class:`MatchingPolytope` -- doubly substochastic agent x item matrices,
* :class:`Explicit` -- an arbitrary bounded halfspace system containing 0.

Vectors are tuples of Fractions; subsets of coordinates are bitmasks.
"""
from __future__ import annotations

import itertools
from collections.abc import Callable, Hashable, Iterable, Sequence
from fractions import Fraction
from typing import Optional

from .core import ONE, ZERO, CapExceeded, State, as_fraction

MAX_SUBSET_UNITS = 20
MAX_VERTEX_UNITS = 12


def _bits(mask: int) -> list[int]:
    out = []
    c = 0
    while mask:
        if mask & 1:
            out.append(c)
        mask >>= 1
        c += 1
    return out


def _dot(a: Sequence[Fraction], b: Sequence[Fraction]) -> Fraction:
    return sum((x * y for x, y in zip(a, b) if x and y), ZERO)


class ConstraintFunction:
    """Upper-constraint function ``C(A, t)`` over subsets of units.

    ``fn`` receives a frozenset of unit positions and a state. Values are
    memoized per call site; ``state_invariant`` lets the memo ignore the
    state.
    """

    def __init__(self, fn: Callable[[frozenset, State], object], n_units: int,
                 state_invariant: bool = False, name: str = "C"):
        self.fn = fn
        self.n = n_units
        self.state_invariant = state_invariant
        self.name = name
        self._memo: dict = {}
        self._submod: dict = {}

    def __repr__(self):
        return f"ConstraintFunction({self.name}, n={self.n})"

    def value(self, mask: int, t: State) -> Fraction:
        key = (mask, None if self.state_invariant else t)
        v = self._memo.get(key)
        if v is None:
            v = as_fraction(self.fn(frozenset(_bits(mask)), t))
            if v < 0:
                raise ValueError(f"{self.name}({_bits(mask)}) = {v} is negative")
            if mask == 0 and v != 0:
                raise ValueError(f"{self.name}(empty set) must be 0, got {v}")
            self._memo[key] = v
        return v

    def __call__(self, subset: Iterable[int], t: State) -> Fraction:
        mask = 0
        for u in subset:
            mask |= 1 << u
        return self.value(mask, t)

    def submodularity_violation(self, t: State) -> Optional[tuple[int, int]]:
        """First pair ``(A+i, A+j)`` violating the local exchange inequality.

        Local exchange ``C(A+i) + C(A+j) >= C(A+i+j) + C(A)`` for all ``A`` and
        ``i, j`` outside ``A`` is equivalent to submodularity.
        """
        if self.n > MAX_SUBSET_UNITS:
            raise CapExceeded(f"{self.n} units exceed subset cap {MAX_SUBSET_UNITS}")
        key = None if self.state_invariant else t
        if key in self._submod:
            return self._submod[key]
        found = None
        full = 1 << self.n
        for A in range(full):
            cA = self.value(A, t)
            free = [u for u in range(self.n) if not A >> u & 1]
            for x, i in enumerate(free):
                Ai = A | 1 << i
                cAi = self.value(Ai, t)
                for j in free[x + 1:]:
                    Aj = A | 1 << j
                    if cAi + self.value(Aj, t) < self.value(Ai | 1 << j, t) + cA:
                        found = (Ai, Aj)
                        break
                if found:
                    break
            if found:
                break
        self._submod[key] = found
        return found

    def is_submodular(self, t: State) -> bool:
        return self.submodularity_violation(t) is None

    def greedy(self, t: State, order: Sequence[int]) -> tuple:
        """Marginal-gain vector along ``order``; zero off the order."""
        rho = [ZERO] * self.n
        mask = 0
        prev = ZERO
        for u in order:
            mask |= 1 << u
            cur = self.value(mask, t)
            rho[u] = cur - prev
            prev = cur
        return tuple(rho)

    # -- common constructors --------------------------------------------
    @classmethod
    def unit_supply(cls, n_units: int) -> "ConstraintFunction":
        """Single divisible item: ``C(A) = 1`` for every nonempty ``A``."""
        return cls(lambda A, t: ONE if A else ZERO, n_units, True, "unit_supply")

    @classmethod
    def capped_cardinality(cls, n_units: int, cap) -> "ConstraintFunction":
        cap = as_fraction(cap)
        return cls(lambda A, t: min(Fraction(len(A)), cap), n_units, True, f"min(|A|,{cap})")

    @classmethod
    def from_table(cls, n_units: int, table: dict, state_table: Optional[dict] = None,
                   name: str = "table") -> "ConstraintFunction":
        """``table`` maps frozensets of unit positions to values.

        ``state_table`` optionally maps states to per-state tables that
        override ``table``.
        """
        table = {frozenset(k): as_fraction(v) for k, v in table.items()}
        table.setdefault(frozenset(), ZERO)
        st = None
        if state_table:
            st = {tuple(s): {frozenset(k): as_fraction(v) for k, v in tab.items()}
                  for s, tab in state_table.items()}

        def fn(A, t):
            if st is not None and t in st and A in st[t]:
                return st[t][A]
            if not A:
                return ZERO
            try:
                return table[A]
            except KeyError:
                raise KeyError(f"constraint table has no entry for units {sorted(A)}") from None

        return cls(fn, n_units, st is None, name)

    @classmethod
    def budget_additive(cls, caps_weights: Callable[[State], Sequence[tuple]], n_units: int,
                        state_invariant: bool = False) -> "ConstraintFunction":
        """``C(A, t) = sum_j min(cap_j, sum_{u in A} w_j[u])``; always submodular."""
        def fn(A, t):
            total = ZERO
            for cap, w in caps_weights(t):
                total += min(as_fraction(cap), sum((as_fraction(w[u]) for u in A), ZERO))
            return total
        return cls(fn, n_units, state_invariant, "budget_additive")


# ---------------------------------------------------------------------------
# exact linear-algebra helpers

def _solve_square(rows: list[list[Fraction]], rhs: list[Fraction]) -> Optional[list[Fraction]]:
    """Unique solution of a square system, or None if singular."""
    n = len(rows)
    m = [list(r) + [b] for r, b in zip(rows, rhs)]
    for col in range(n):
        piv = next((r for r in range(col, n) if m[r][col]), None)
        if piv is None:
            return None
        m[col], m[piv] = m[piv], m[col]
        p = m[col][col]
        m[col] = [v / p for v in m[col]]
        for r in range(n):
            if r != col and m[r][col]:
                f = m[r][col]
                m[r] = [a - f * b for a, b in zip(m[r], m[col])]
    return [m[r][n] for r in range(n)]


def vertices_from_halfspaces(dim: int, halfspaces: Sequence[tuple]) -> list[tuple]:
    """All vertices of ``{x >= 0 : a.x <= b}`` by brute-force basis enumeration."""
    if dim > MAX_VERTEX_UNITS:
        raise CapExceeded(f"dimension {dim} exceeds vertex cap {MAX_VERTEX_UNITS}")
    rows = [(tuple(as_fraction(a) for a in A), as_fraction(b)) for A, b in halfspaces]
    for d in range(dim):
        e = [ZERO] * dim
        e[d] = -ONE
        rows.append((tuple(e), ZERO))
    found = set()
    for combo in itertools.combinations(range(len(rows)), dim):
        x = _solve_square([list(rows[r][0]) for r in combo], [rows[r][1] for r in combo])
        if x is None:
            continue
        if all(_dot(A, x) <= b for A, b in rows):
            found.add(tuple(x))
    return sorted(found)


# ---------------------------------------------------------------------------
# bipartite matching

def max_cardinality_matching(edges: Iterable[tuple[int, int]], n_left: int) -> int:
    """Size of a maximum matching (Kuhn's augmenting paths)."""
    adj: list[list[int]] = [[] for _ in range(n_left)]
    for i, n in edges:
        adj[i].append(n)
    match_right: dict[int, int] = {}

    def augment(i, seen):
        for n in adj[i]:
            if n in seen:
                continue
            seen.add(n)
            if n not in match_right or augment(match_right[n], seen):
                match_right[n] = i
                return True
        return False

    size = 0
    for i in range(n_left):
        if adj[i] and augment(i, set()):
            size += 1
    return size


def max_weight_matching(weights: Sequence[Sequence[Fraction]]) -> tuple[Fraction, list[tuple[int, int]]]:
    """Maximum-weight bipartite matching on the positive-weight edges.

    Successive shortest augmenting paths in the min-cost-flow residual graph
    (edge cost = -weight), found by Bellman-Ford in exact arithmetic. Each
    augmentation raises the matching size by one; we stop once the best path
    no longer has positive gain, which is optimal because the optimal cost
    is convex in the flow value. Relaxations follow agent then item index
    order, which makes the argmax deterministic.
    """
    n_i = len(weights)
    n_n = len(weights[0]) if n_i else 0
    w = [[as_fraction(x) for x in row] for row in weights]
    mate_i: list[Optional[int]] = [None] * n_i
    mate_n: list[Optional[int]] = [None] * n_n
    # nodes: source, agents 0..n_i-1, items; gain = -cost
    while True:
        g_i: list[Optional[Fraction]] = [ZERO if mate_i[i] is None else None for i in range(n_i)]
        g_n: list[Optional[Fraction]] = [None] * n_n
        pred_n: list[Optional[int]] = [None] * n_n
        for _ in range(n_i + n_n + 1):
            changed = False
            for i in range(n_i):
                if g_i[i] is None:
                    continue
                for n in range(n_n):
                    if w[i][n] > 0 and mate_i[i] != n:
                        g = g_i[i] + w[i][n]
                        if g_n[n] is None or g > g_n[n]:
                            g_n[n], pred_n[n] = g, i
                            changed = True
            for n in range(n_n):
                j = mate_n[n]
                if j is not None and g_n[n] is not None:
                    g = g_n[n] - w[j][n]
                    if g_i[j] is None or g > g_i[j]:
                        g_i[j] = g
                        changed = True
            if not changed:
                break
        else:  # pragma: no cover - residual graph has no positive cycles
            raise AssertionError("positive cycle in residual graph")
        best = None
        for n in range(n_n):
            if mate_n[n] is None and g_n[n] is not None and g_n[n] > 0:
                if best is None or g_n[n] > g_n[best]:
                    best = n
        if best is None:
            break
        n = best
        for _ in range(n_i + n_n):
            i = pred_n[n]
            old = mate_i[i]
            mate_i[i], mate_n[n] = n, i
            if old is None:
                break
            mate_n[old] = None
            n = old
        else:  # pragma: no cover
            raise AssertionError("augmenting path did not terminate")
    pairs = [(i, mate_i[i]) for i in range(n_i) if mate_i[i] is not None]
    value = sum((w[i][n] for i, n in pairs), ZERO)
    return value, pairs


def max_weight_matching_bruteforce(weights: Sequence[Sequence[Fraction]]) -> Fraction:
    """Reference optimum by enumerating every partial matching."""
    n_i = len(weights)
    n_n = len(weights[0]) if n_i else 0
    best = ZERO
    for m in partial_matchings(n_i, n_n):
        v = sum((as_fraction(weights[i][n]) for i, n in m), ZERO)
        best = max(best, v)
    return best


def partial_matchings(n_i: int, n_n: int) -> list[tuple[tuple[int, int], ...]]:
    out = []

    def rec(i, used, acc):
        if i == n_i:
            out.append(tuple(acc))
            return
        rec(i + 1, used, acc)
        for n in range(n_n):
            if not used >> n & 1:
                acc.append((i, n))
                rec(i + 1, used | 1 << n, acc)
                acc.pop()

    rec(0, 0, [])
    return out


# ---------------------------------------------------------------------------
# polytope variants

class Polymatroid:
    """``{rho >= 0 : sum_{u in A} rho(u) <= C(A, t) for all A}``."""

    def __init__(self, C: ConstraintFunction):
        self.C = C
        self.dim = C.n

    def __repr__(self):
        return f"Polymatroid({self.C!r})"

    def contains(self, t: State, rho: Sequence) -> bool:
        rho = _check_dim(self.dim, rho)
        if any(x < 0 for x in rho):
            return False
        if self.dim > MAX_SUBSET_UNITS:
            raise CapExceeded(f"{self.dim} units exceed subset cap")
        for A in range(1, 1 << self.dim):
            if sum((rho[u] for u in _bits(A)), ZERO) > self.C.value(A, t):
                return False
        return True

    def halfspaces(self, t: State) -> list[tuple]:
        if self.dim > MAX_SUBSET_UNITS:
            raise CapExceeded(f"{self.dim} units exceed subset cap")
        out = []
        for A in range(1, 1 << self.dim):
            coeffs = tuple(ONE if A >> u & 1 else ZERO for u in range(self.dim))
            out.append((coeffs, self.C.value(A, t)))
        return out

    def maximize(self, t: State, gamma: Sequence) -> tuple[Fraction, tuple]:
        gamma = _check_dim(self.dim, gamma)
        if self.C.is_submodular(t):
            order = sorted((u for u in range(self.dim) if gamma[u] > 0),
                           key=lambda u: (-gamma[u], u))
            rho = self.C.greedy(t, order)
            return _dot(gamma, rho), rho
        return _lp_maximize(self.dim, self.halfspaces(t), gamma)

    def extreme_points(self, t: State) -> list[tuple]:
        if self.dim > MAX_VERTEX_UNITS:
            raise CapExceeded(f"dimension {self.dim} exceeds vertex cap {MAX_VERTEX_UNITS}")
        if not self.C.is_submodular(t):
            return vertices_from_halfspaces(self.dim, self.halfspaces(t))
        found = set()
        for k in range(self.dim + 1):
            for order in itertools.permutations(range(self.dim), k):
                found.add(self.C.greedy(t, order))
        return sorted(found)


class MatchingPolytope:
    """One-to-one matching: rows and columns of ``rho`` sum to at most 1."""

    def __init__(self, n_agents: int, n_items: int):
        self.n_agents = n_agents
        self.n_items = n_items
        self.dim = n_agents * n_items

    def __repr__(self):
        return f"MatchingPolytope({self.n_agents}x{self.n_items})"

    @classmethod
    def for_instance(cls, inst) -> "MatchingPolytope":
        return cls(len(inst.carriers), len(inst.items))

    def coord(self, i: int, n: int) -> int:
        return i * self.n_items + n

    def contains(self, t: State, rho: Sequence) -> bool:
        rho = _check_dim(self.dim, rho)
        if any(x < 0 for x in rho):
            return False
        for coeffs, b in self.halfspaces(t):
            if _dot(coeffs, rho) > b:
                return False
        return True

    def halfspaces(self, t: State = None) -> list[tuple]:
        out = []
        for i in range(self.n_agents):
            out.append((tuple(ONE if c // self.n_items == i else ZERO for c in range(self.dim)), ONE))
        for n in range(self.n_items):
            out.append((tuple(ONE if c % self.n_items == n else ZERO for c in range(self.dim)), ONE))
        return out

    def maximize(self, t: State, gamma: Sequence) -> tuple[Fraction, tuple]:
        gamma = _check_dim(self.dim, gamma)
        w = [[gamma[self.coord(i, n)] for n in range(self.n_items)] for i in range(self.n_agents)]
        value, pairs = max_weight_matching(w)
        rho = [ZERO] * self.dim
        for i, n in pairs:
            rho[self.coord(i, n)] = ONE
        return value, tuple(rho)

    def capacity(self, X: Iterable[int]) -> Fraction:
        """Maximum matching size within the coordinate set ``X``."""
        edges = [(c // self.n_items, c % self.n_items) for c in X]
        return Fraction(max_cardinality_matching(edges, self.n_agents))

    def capacity_mask(self, mask: int) -> Fraction:
        return self.capacity(_bits(mask))

    def extreme_points(self, t: State = None) -> list[tuple]:
        if self.dim > MAX_VERTEX_UNITS:
            raise CapExceeded(f"dimension {self.dim} exceeds vertex cap {MAX_VERTEX_UNITS}")
        out = []
        for m in partial_matchings(self.n_agents, self.n_items):
            rho = [ZERO] * self.dim
            for i, n in m:
                rho[self.coord(i, n)] = ONE
            out.append(tuple(rho))
        return sorted(out)


class Explicit:
    """Halfspace system ``a . rho <= b`` (plus ``rho >= 0``), possibly state-indexed.

    ``halfspaces`` is either a list of ``(coeffs, rhs)`` pairs or a callable
    from states to such a list. Equalities are written as two inequalities.
    """

    def __init__(self, dim: int, halfspaces):
        self.dim = dim
        self._hs = halfspaces

    def __repr__(self):
        return f"Explicit(dim={self.dim})"

    def halfspaces(self, t: State) -> list[tuple]:
        hs = self._hs(t) if callable(self._hs) else self._hs
        out = []
        for coeffs, b in hs:
            coeffs = tuple(as_fraction(a) for a in coeffs)
            if len(coeffs) != self.dim:
                raise ValueError("halfspace dimension mismatch")
            b = as_fraction(b)
            if b < 0:
                raise ValueError("explicit polytope must contain 0 (all rhs >= 0)")
            out.append((coeffs, b))
        return out

    def contains(self, t: State, rho: Sequence) -> bool:
        rho = _check_dim(self.dim, rho)
        if any(x < 0 for x in rho):
            return False
        return all(_dot(a, rho) <= b for a, b in self.halfspaces(t))

    def maximize(self, t: State, gamma: Sequence) -> tuple[Fraction, tuple]:
        return _lp_maximize(self.dim, self.halfspaces(t), _check_dim(self.dim, gamma))

    def extreme_points(self, t: State) -> list[tuple]:
        return vertices_from_halfspaces(self.dim, self.halfspaces(t))

    @classmethod
    def public_goods(cls, n_agents: int, n_alternatives: int) -> "Explicit":
        """Common allocation across agents per alternative, total at most 1."""
        dim = n_agents * n_alternatives
        hs = [(tuple([ONE] * dim), ONE)]
        for n in range(n_alternatives):
            for i in range(n_agents - 1):
                a = [ZERO] * dim
                a[i * n_alternatives + n] = ONE
                a[(i + 1) * n_alternatives + n] = -ONE
                hs.append((tuple(a), ZERO))
                hs.append((tuple(-x for x in a), ZERO))
        return cls(dim, hs)


def _check_dim(dim: int, vec: Sequence) -> tuple:
    if len(vec) != dim:
        raise ValueError(f"vector has {len(vec)} coordinates, polytope has {dim}")
    return tuple(as_fraction(x) for x in vec)


def _lp_maximize(dim: int, halfspaces: Sequence[tuple], gamma: Sequence[Fraction]):
    from .lp import LE, LinearProgram, UnboundedError, solve
    lp = LinearProgram()
    for _ in range(dim):
        lp.add_var()
    for coeffs, b in halfspaces:
        lp.add_constraint({c: a for c, a in enumerate(coeffs) if a}, LE, b)
    lp.set_objective({c: g for c, g in enumerate(gamma) if g})
    res = solve(lp)
    if res.status == "unbounded":
        raise UnboundedError("linear maximization over the polytope is unbounded")
    if res.status != "optimal":
        raise ValueError("polytope is empty")
    return res.value, tuple(res.certificate.values)


# module-level spellings

def contains(poly, t: State, rho: Sequence) -> bool:
    return poly.contains(t, rho)


def maximize_linear(poly, t: State, gamma: Sequence) -> tuple[Fraction, tuple]:
    return poly.maximize(t, gamma)


def extreme_points(poly, t: State) -> list[tuple]:
    return poly.extreme_points(t)


def capacity(poly: MatchingPolytope, X: Iterable) -> Fraction:
    """Max-matching size within ``X``; ``X`` holds coordinate indices or (i, n) index pairs."""
    coords = []
    for x in X:
        if isinstance(x, tuple):
            coords.append(poly.coord(*x))
        else:
            coords.append(x)
    return poly.capacity(coords)


def default_polytope(inst, C: Optional[ConstraintFunction] = None):
    if inst.kind == "matching":
        return MatchingPolytope.for_instance(inst)
    return Polymatroid(C if C is not None else ConstraintFunction.unit_supply(inst.n_coords))


def matching_capacity_function(n_agents: int, n_items: int) -> ConstraintFunction:
    """The matching capacity viewed as a set function on agent-item coordinates."""
    poly = MatchingPolytope(n_agents, n_items)
    return ConstraintFunction(lambda A, t: poly.capacity(A), poly.dim, True, "matching_capacity")


Label = Hashable
