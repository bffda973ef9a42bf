"""Instances, priors, allocation rules and the interim transform.

Everything here is exact: probabilities and allocation weights are
``fractions.Fraction`` values. A *state* is a tuple holding one type label
per carrier, where carriers are the units of a general instance or the agents
of a matching instance.

Keys of the non-null type union (``Instance.tstar``) are ``(unit, type)``
pairs for general instances and ``(agent, type, item)`` triples for matching
instances.
"""
from __future__ import annotations

import itertools
from collections.abc import Hashable, Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Union

ZERO = Fraction(0)
ONE = Fraction(1)

DEFAULT_MAX_STATES = 10_000

Key = tuple
State = tuple
Number = Union[int, Fraction, str]


class InstanceError(ValueError):
    """Malformed instance or prior."""


class CapExceeded(RuntimeError):
    """A desk-scale enumeration cap was exceeded."""


def as_fraction(x: Number) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x.strip())
    if isinstance(x, float):
        raise TypeError(f"refusing float {x!r}; pass a Fraction or 'p/q' string")
    return Fraction(x)


class Prior:
    """Joint distribution over type profiles.

    Zero-probability states may be omitted from ``joint``. Marginals and
    conditionals are derived on construction.
    """

    def __init__(self, type_sets: Sequence[Sequence[Hashable]],
                 joint: Mapping[State, Number]):
        self.type_sets = tuple(tuple(ts) for ts in type_sets)
        table: dict[State, Fraction] = {}
        for t, p in joint.items():
            t = tuple(t)
            if len(t) != len(self.type_sets):
                raise InstanceError(f"profile {t!r} has wrong length")
            for k, tau in enumerate(t):
                if tau not in self.type_sets[k]:
                    raise InstanceError(f"type {tau!r} not in type set of carrier {k}")
            p = as_fraction(p)
            if p < 0:
                raise InstanceError(f"negative probability {p} at {t!r}")
            if p:
                table[t] = table.get(t, ZERO) + p
        total = sum(table.values(), ZERO)
        if total != 1:
            raise InstanceError(f"probabilities sum to {total}, not 1")
        self.joint = table
        self.marginals: list[dict[Hashable, Fraction]] = [
            {tau: ZERO for tau in ts} for ts in self.type_sets]
        for t, p in table.items():
            for k, tau in enumerate(t):
                self.marginals[k][tau] += p

    @classmethod
    def product(cls, marginals: Sequence[Mapping[Hashable, Number]]) -> "Prior":
        """Independent prior from per-carrier marginal tables."""
        type_sets = [list(m) for m in marginals]
        fracs = [{tau: as_fraction(p) for tau, p in m.items()} for m in marginals]
        joint = {}
        for t in itertools.product(*type_sets):
            p = ONE
            for k, tau in enumerate(t):
                p *= fracs[k][tau]
            joint[t] = p
        return cls(type_sets, joint)

    @classmethod
    def uniform(cls, type_sets: Sequence[Sequence[Hashable]]) -> "Prior":
        n = 1
        for ts in type_sets:
            n *= len(ts)
        return cls(type_sets, {t: Fraction(1, n) for t in itertools.product(*type_sets)})

    def prob(self, t: State) -> Fraction:
        return self.joint.get(tuple(t), ZERO)

    def marginal(self, carrier: int, tau: Hashable) -> Fraction:
        return self.marginals[carrier].get(tau, ZERO)

    def conditional(self, carrier: int, t: State) -> Fraction:
        """mu_u(t_{-u} | t_u) for the profile ``t``."""
        m = self.marginal(carrier, t[carrier])
        if not m:
            raise InstanceError(f"conditioning on null type {t[carrier]!r}")
        return self.prob(t) / m

    def support(self) -> list[State]:
        return list(self.joint)

    def is_independent(self) -> bool:
        for t in itertools.product(*self.type_sets):
            p = ONE
            for k, tau in enumerate(t):
                p *= self.marginals[k][tau]
            if p != self.prob(t):
                return False
        return True


@dataclass(frozen=True, eq=False)
class Instance:
    """A finite realizability problem.

    ``kind`` is ``"general"`` (coordinates are units, each carrying its own
    type) or ``"matching"`` (coordinates are agent-item pairs in agent-major
    order, sharing the agent's type).
    """

    kind: str
    carriers: tuple
    items: tuple
    prior: Prior
    max_states: int = DEFAULT_MAX_STATES
    coords: tuple = field(init=False)
    coord_carrier: tuple = field(init=False)
    states: tuple = field(init=False)
    tstar: tuple = field(init=False)
    key_index: dict = field(init=False)
    key_mass: dict = field(init=False)

    def __post_init__(self):
        if self.kind not in ("general", "matching"):
            raise InstanceError(f"unknown kind {self.kind!r}")
        if len(self.prior.type_sets) != len(self.carriers):
            raise InstanceError("one type set per carrier required")
        if len(set(self.carriers)) != len(self.carriers):
            raise InstanceError("duplicate carrier labels")
        for k, ts in enumerate(self.prior.type_sets):
            if not ts:
                raise InstanceError(f"empty type set for {self.carriers[k]!r}")
            if len(set(ts)) != len(ts):
                raise InstanceError(f"duplicate types for {self.carriers[k]!r}")
        n_states = 1
        for ts in self.prior.type_sets:
            n_states *= len(ts)
        if n_states > self.max_states:
            raise CapExceeded(f"|T| = {n_states} exceeds cap {self.max_states}")
        if self.kind == "general":
            if self.items:
                raise InstanceError("general instances have no items")
            coords = tuple(self.carriers)
            coord_carrier = tuple(range(len(self.carriers)))
        else:
            if not self.items or len(set(self.items)) != len(self.items):
                raise InstanceError("matching instances need distinct items")
            coords = tuple((i, n) for i in self.carriers for n in self.items)
            coord_carrier = tuple(k for k in range(len(self.carriers)) for _ in self.items)
        set_ = object.__setattr__
        set_(self, "coords", coords)
        set_(self, "coord_carrier", coord_carrier)
        set_(self, "states", tuple(self.prior.support()))
        tstar = []
        mass = {}
        for k, i in enumerate(self.carriers):
            for tau in self.prior.type_sets[k]:
                m = self.prior.marginal(k, tau)
                if not m:
                    continue
                if self.kind == "general":
                    keys = [(i, tau)]
                else:
                    keys = [(i, tau, n) for n in self.items]
                for key in keys:
                    tstar.append(key)
                    mass[key] = m
        set_(self, "tstar", tuple(tstar))
        set_(self, "key_index", {key: j for j, key in enumerate(tstar)})
        set_(self, "key_mass", mass)

    # -- constructors ---------------------------------------------------
    @classmethod
    def general(cls, units: Sequence[Hashable], prior: Prior, **kw) -> "Instance":
        return cls("general", tuple(units), (), prior, **kw)

    @classmethod
    def matching(cls, agents: Sequence[Hashable], items: Sequence[Hashable],
                 prior: Prior, **kw) -> "Instance":
        return cls("matching", tuple(agents), tuple(items), prior, **kw)

    # -- lookups --------------------------------------------------------
    @property
    def type_sets(self) -> tuple:
        return self.prior.type_sets

    @property
    def n_coords(self) -> int:
        return len(self.coords)

    def carrier_index(self, label: Hashable) -> int:
        return self.carriers.index(label)

    def item_index(self, label: Hashable) -> int:
        return self.items.index(label)

    def key(self, c: int, t: State) -> Key:
        """The TStar key realized by coordinate ``c`` in state ``t``."""
        k = self.coord_carrier[c]
        if self.kind == "general":
            return (self.carriers[k], t[k])
        i, n = self.coords[c]
        return (i, t[k], n)

    def key_coord(self, key: Key) -> int:
        """Coordinate index of a TStar key."""
        if self.kind == "general":
            return self.carriers.index(key[0])
        return self.carriers.index(key[0]) * len(self.items) + self.items.index(key[2])

    def key_carrier(self, key: Key) -> int:
        return self.carriers.index(key[0])

    def realizes(self, t: State, key: Key) -> bool:
        """``t ~ key``: the key's carrier has the key's type in ``t``."""
        return t[self.carriers.index(key[0])] == key[1]

    def mass(self, key: Key) -> Fraction:
        return self.key_mass[key]

    def states_with(self, key: Key) -> list[State]:
        k = self.carriers.index(key[0])
        return [t for t in self.states if t[k] == key[1]]


class Interim(Mapping):
    """Interim allocation Q over TStar keys; absent keys read as zero."""

    __slots__ = ("_values",)

    def __init__(self, values: Mapping[Key, Number] | Iterable = ()):
        items = values.items() if isinstance(values, Mapping) else values
        vals = {}
        for k, v in items:
            v = as_fraction(v)
            if v < 0:
                raise ValueError(f"negative interim value {v} at {k!r}")
            if v:
                vals[tuple(k)] = v
        self._values = vals

    def __getitem__(self, key):
        return self._values.get(key, ZERO)

    def __contains__(self, key):
        return key in self._values

    def __iter__(self) -> Iterator:
        return iter(self._values)

    def __len__(self) -> int:
        return len(self._values)

    def __eq__(self, other):
        if isinstance(other, Interim):
            return self._values == other._values
        return NotImplemented

    def __hash__(self):
        return hash(frozenset(self._values.items()))

    def __repr__(self):
        body = ", ".join(f"{k!r}: {v}" for k, v in self._values.items())
        return f"Interim({{{body}}})"

    def scaled(self, alpha: Number) -> "Interim":
        alpha = as_fraction(alpha)
        return Interim({k: v * alpha for k, v in self._values.items()})

    def weighted(self, inst: Instance) -> list[Fraction]:
        """Ex-ante weights Q(key) * mu(key) in TStar order."""
        return [self[key] * inst.key_mass[key] for key in inst.tstar]

    def dot(self, weights: Mapping[Key, Fraction]) -> Fraction:
        return sum((v * weights.get(k, ZERO) for k, v in self._values.items()), ZERO)


class AllocationRule:
    """Ex-post rule q: state -> assignment vector over coordinates.

    States not present in the table are assigned the zero vector.
    """

    __slots__ = ("n_coords", "_table")

    def __init__(self, n_coords: int, table: Mapping[State, Sequence[Number]] = ()):
        self.n_coords = n_coords
        tab = {}
        for t, vec in dict(table).items():
            vec = tuple(as_fraction(x) for x in vec)
            if len(vec) != n_coords:
                raise ValueError(f"assignment at {t!r} has {len(vec)} coords, need {n_coords}")
            if any(x < 0 for x in vec):
                raise ValueError(f"negative assignment at {t!r}")
            if any(vec):
                tab[tuple(t)] = vec
        self._table = tab

    def at(self, t: State) -> tuple:
        v = self._table.get(tuple(t))
        return v if v is not None else (ZERO,) * self.n_coords

    def items(self):
        return self._table.items()

    def __eq__(self, other):
        if isinstance(other, AllocationRule):
            return self.n_coords == other.n_coords and self._table == other._table
        return NotImplemented

    def __repr__(self):
        return f"AllocationRule({len(self._table)} nonzero states)"

    def restricted(self, states: Iterable[State]) -> "AllocationRule":
        return AllocationRule(self.n_coords, {t: self.at(t) for t in states})

    @classmethod
    def constant(cls, inst: Instance, vec: Sequence[Number]) -> "AllocationRule":
        return cls(inst.n_coords, {t: vec for t in inst.states})

    def mix(self, other: "AllocationRule", beta: Number) -> "AllocationRule":
        beta = as_fraction(beta)
        states = set(self._table) | set(other._table)
        return AllocationRule(self.n_coords, {
            t: [beta * a + (1 - beta) * b for a, b in zip(self.at(t), other.at(t))]
            for t in states})


def build_instance(description: Mapping[str, Any]) -> Instance:
    """Build an instance from a parsed description (see ``reducedform.io``)."""
    from .io import instance_from_dict
    return instance_from_dict(description)


def interim_of(q: AllocationRule, inst: Instance, poly=None) -> Interim:
    """Average each coordinate's allocation over the other carriers' types.

    If ``poly`` is given, feasibility of ``q`` is checked state by state.
    """
    if q.n_coords != inst.n_coords:
        raise ValueError("allocation rule dimension does not match instance")
    if poly is not None:
        for t in inst.states:
            if not poly.contains(t, q.at(t)):
                raise ValueError(f"allocation infeasible in state {t!r}")
    acc: dict[Key, Fraction] = {}
    for t in inst.states:
        vec = q.at(t)
        p = inst.prior.prob(t)
        for c, x in enumerate(vec):
            if x:
                key = inst.key(c, t)
                acc[key] = acc.get(key, ZERO) + p * x
    return Interim({k: v / inst.key_mass[k] for k, v in acc.items()})


def active_set(inst: Instance, A: Iterable[Key], t: State) -> set:
    """S(A, t): coordinates whose realized key in ``t`` lies in ``A``."""
    A = set(A)
    return {inst.coords[c] for c in range(inst.n_coords) if inst.key(c, t) in A}


def active_mask(inst: Instance, A: Iterable[Key], t: State) -> int:
    A = set(A)
    mask = 0
    for c in range(inst.n_coords):
        if inst.key(c, t) in A:
            mask |= 1 << c
    return mask


def scale(Q: Interim, alpha: Number) -> Interim:
    alpha = as_fraction(alpha)
    if not 0 <= alpha <= 1:
        raise ValueError(f"scale factor {alpha} outside [0, 1]")
    return Q.scaled(alpha)


def ex_ante_mass(Q: Interim, inst: Instance) -> Fraction:
    return sum(Q.weighted(inst), ZERO)


def prefix_masses(Q: Interim, order: Sequence[Key], inst: Instance) -> list[Fraction]:
    """Cumulative ex-ante mass of ``Q`` along ``order``, starting with 0."""
    out = [ZERO]
    for key in order:
        out.append(out[-1] + Q[key] * inst.key_mass[key])
    return out


@dataclass(frozen=True)
class Verdict:
    """Outcome of a check: ``ok`` plus whatever witness explains a failure."""

    ok: bool
    witness: Any = None
    info: dict = field(default_factory=dict)

    def __bool__(self):
        return self.ok


class WeightVector(Mapping):
    """Linear functional lambda on TStar; ``lambda(Q) = sum lambda(key) Q(key)``.

    Absent keys read as zero. ``conditional`` gives the state-wise ex-post
    weights ``lambda(key(c, t)) / mu(key)``, which lie in [-1, 1] exactly when
    the vector is normalized.
    """

    __slots__ = ("_values", "_hash")

    def __init__(self, values: Mapping[Key, Number] | Iterable = ()):
        items = values.items() if isinstance(values, Mapping) else values
        self._values = {tuple(k): as_fraction(v) for k, v in items if as_fraction(v)}
        self._hash = None

    def __getitem__(self, key):
        return self._values.get(key, ZERO)

    def __iter__(self):
        return iter(self._values)

    def __len__(self):
        return len(self._values)

    def __eq__(self, other):
        if isinstance(other, WeightVector):
            return self._values == other._values
        return NotImplemented

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self._values.items()))
        return self._hash

    def __repr__(self):
        body = ", ".join(f"{k!r}: {v}" for k, v in self._values.items())
        return f"WeightVector({{{body}}})"

    def __call__(self, Q: Mapping[Key, Fraction]) -> Fraction:
        return sum((v * Q.get(k, ZERO) for k, v in self._values.items()), ZERO)

    def is_normalized(self, inst: Instance) -> bool:
        for k, v in self._values.items():
            if k not in inst.key_mass or abs(v) > inst.key_mass[k]:
                return False
        return True

    def conditional(self, inst: Instance, t: State) -> tuple:
        return tuple(self[inst.key(c, t)] / inst.key_mass[inst.key(c, t)]
                     if inst.key(c, t) in inst.key_mass else ZERO
                     for c in range(inst.n_coords))

    def positive_part(self) -> "WeightVector":
        return WeightVector({k: v for k, v in self._values.items() if v > 0})

    def midpoint(self, other: "WeightVector") -> "WeightVector":
        keys = set(self._values) | set(other._values)
        return WeightVector({k: (self[k] + other[k]) / 2 for k in keys})
