"""Exact rational linear programming and the realizability oracle.

The solver is a dense-objective, sparse-row tableau simplex with Bland's
rule in both phases. Variables are nonnegative. Infeasible programs come back
with Farkas multipliers ``y`` satisfying ``y >= 0`` on ``<=`` rows, ``y <= 0``
on ``>=`` rows, ``y . A >= 0`` column-wise and ``y . b < 0``.

Tableau arithmetic runs on ``gmpy2.mpq`` when available; every value that
leaves this module is a ``fractions.Fraction``.
"""
from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Union

from .core import (
    ZERO, AllocationRule, CapExceeded, Instance, Interim, as_fraction,
)

try:
    from gmpy2 import mpq as _Q
except ImportError:  # pragma: no cover
    _Q = Fraction

LE, EQ, GE = "<=", "==", ">="

DEFAULT_MAX_BITS = 4096
DEFAULT_MAX_VARIABLES = 20_000


class LPMagnitudeError(ArithmeticError):
    """Tableau entries grew past the configured bit-length guard."""


class UnboundedError(ArithmeticError):
    """A maximization that was expected to be bounded is not."""


def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    return Fraction(int(x.numerator), int(x.denominator))


@dataclass
class Constraint:
    coeffs: dict
    rel: str
    rhs: Fraction
    name: object = None


@dataclass
class LinearProgram:
    """maximize ``objective . x`` subject to ``constraints``, ``x >= 0``."""

    n_vars: int = 0
    objective: dict = field(default_factory=dict)
    constraints: list = field(default_factory=list)
    var_names: list = field(default_factory=list)

    def add_var(self, name=None) -> int:
        self.var_names.append(name)
        self.n_vars += 1
        return self.n_vars - 1

    def add_constraint(self, coeffs: Mapping[int, object], rel: str, rhs, name=None) -> int:
        if rel not in (LE, EQ, GE):
            raise ValueError(f"bad relation {rel!r}")
        row = {}
        for j, a in coeffs.items():
            if not 0 <= j < self.n_vars:
                raise IndexError(f"variable {j} out of range")
            a = as_fraction(a)
            if a:
                row[j] = row.get(j, ZERO) + a
        self.constraints.append(Constraint(row, rel, as_fraction(rhs), name))
        return len(self.constraints) - 1

    def set_objective(self, coeffs: Mapping[int, object]) -> None:
        self.objective = {j: as_fraction(a) for j, a in coeffs.items() if a}

    def permuted(self, row_perm: Sequence[int], col_perm: Sequence[int]) -> "LinearProgram":
        """Copy with rows reordered and variable ``j`` renamed ``col_perm[j]``."""
        out = LinearProgram(self.n_vars, {col_perm[j]: a for j, a in self.objective.items()},
                            [], [None] * self.n_vars)
        for j, name in enumerate(self.var_names):
            out.var_names[col_perm[j]] = name
        for r in row_perm:
            c = self.constraints[r]
            out.constraints.append(Constraint({col_perm[j]: a for j, a in c.coeffs.items()},
                                              c.rel, c.rhs, c.name))
        return out

    def satisfied_by(self, x: Sequence[Fraction]) -> bool:
        if len(x) != self.n_vars or any(v < 0 for v in x):
            return False
        for c in self.constraints:
            lhs = sum((a * x[j] for j, a in c.coeffs.items()), ZERO)
            if c.rel == LE and lhs > c.rhs:
                return False
            if c.rel == GE and lhs < c.rhs:
                return False
            if c.rel == EQ and lhs != c.rhs:
                return False
        return True


@dataclass(frozen=True)
class Feasible:
    values: tuple

    def verify(self, lp: LinearProgram) -> bool:
        return lp.satisfied_by(self.values)


@dataclass(frozen=True)
class Infeasible:
    multipliers: tuple

    def verify(self, lp: LinearProgram) -> bool:
        """Check that the multipliers combine to ``0 <= negative``."""
        y = self.multipliers
        if len(y) != len(lp.constraints):
            return False
        combo = [ZERO] * lp.n_vars
        rhs = ZERO
        for yr, c in zip(y, lp.constraints):
            if c.rel == LE and yr < 0 or c.rel == GE and yr > 0:
                return False
            for j, a in c.coeffs.items():
                combo[j] += yr * a
            rhs += yr * c.rhs
        return all(v >= 0 for v in combo) and rhs < 0


Certificate = Union[Feasible, Infeasible]


@dataclass(frozen=True)
class LPResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    value: Optional[Fraction]
    certificate: Optional[Certificate]
    pivots: int = 0

    @property
    def feasible(self) -> bool:
        return self.status != "infeasible"


class _Tableau:
    def __init__(self, max_bits):
        self.rows: list[dict] = []
        self.rhs: list = []
        self.basis: list[int] = []
        self.d: dict = {}
        self.val = _Q(0)
        self.max_bits = max_bits
        self.pivots = 0

    def pivot(self, r: int, j: int) -> None:
        row = self.rows[r]
        a = row[j]
        if a != 1:
            inv = 1 / a
            for k in row:
                row[k] *= inv
            self.rhs[r] *= inv
        b = self.rhs[r]
        for i, other in enumerate(self.rows):
            if i == r:
                continue
            f = other.get(j)
            if f is None:
                continue
            for k, v in row.items():
                nv = other.get(k, 0) - f * v
                if nv:
                    other[k] = nv
                else:
                    other.pop(k, None)
            self.rhs[i] -= f * b
        f = self.d.get(j)
        if f:
            for k, v in row.items():
                nv = self.d.get(k, 0) - f * v
                if nv:
                    self.d[k] = nv
                else:
                    self.d.pop(k, None)
            self.val += f * b
        self.basis[r] = j
        self.pivots += 1
        if self.max_bits:
            limit = self.max_bits
            for v in row.values():
                if v.numerator.bit_length() > limit or v.denominator.bit_length() > limit:
                    raise LPMagnitudeError(
                        f"tableau entry exceeds {limit} bits after {self.pivots} pivots")

    def run(self, allowed) -> Optional[int]:
        """Bland iterations; returns an unbounded entering column or None."""
        while True:
            j = min((k for k, v in self.d.items() if v > 0 and allowed(k)), default=None)
            if j is None:
                return None
            best = None
            for i, row in enumerate(self.rows):
                a = row.get(j)
                if a is not None and a > 0:
                    ratio = self.rhs[i] / a
                    cand = (ratio, self.basis[i])
                    if best is None or cand < best[0]:
                        best = (cand, i)
            if best is None:
                return j
            self.pivot(best[1], j)


def solve(lp: LinearProgram, max_bits: int = DEFAULT_MAX_BITS) -> LPResult:
    """Solve ``lp`` exactly with the two-phase simplex method."""
    n = lp.n_vars
    tab = _Tableau(max_bits)
    signs = []
    n_cols = n
    art_cols = set()
    slack_of = {}
    art_of = {}
    for r, con in enumerate(lp.constraints):
        rel, rhs = con.rel, con.rhs
        sign = 1
        if rhs < 0:
            sign = -1
            rhs = -rhs
            rel = {LE: GE, GE: LE, EQ: EQ}[rel]
        signs.append(sign)
        row = {j: _Q(sign * a) for j, a in con.coeffs.items()}
        if rel == LE:
            row[n_cols] = _Q(1)
            slack_of[r] = n_cols
            tab.basis.append(n_cols)
            n_cols += 1
        else:
            if rel == GE:
                row[n_cols] = _Q(-1)
                n_cols += 1
            row[n_cols] = _Q(1)
            art_of[r] = n_cols
            art_cols.add(n_cols)
            tab.basis.append(n_cols)
            n_cols += 1
        tab.rows.append(row)
        tab.rhs.append(_Q(rhs))

    # phase 1: maximize -sum(artificials)
    for r, col in art_of.items():
        for k, v in tab.rows[r].items():
            if k != col:
                tab.d[k] = tab.d.get(k, 0) + v
        tab.val -= tab.rhs[r]
    tab.d = {k: v for k, v in tab.d.items() if v}
    tab.run(lambda k: True)
    if tab.val < 0:
        y = []
        for r in range(len(lp.constraints)):
            if r in slack_of:
                yr = -tab.d.get(slack_of[r], 0)
            else:
                yr = -1 - tab.d.get(art_of[r], 0)
            y.append(_frac(yr) * signs[r])
        cert = Infeasible(tuple(y))
        assert cert.verify(lp), "internal error: Farkas certificate failed to verify"
        return LPResult("infeasible", None, cert, tab.pivots)

    # drive remaining artificials out of the basis, dropping redundant rows
    r = 0
    while r < len(tab.rows):
        if tab.basis[r] in art_cols:
            row = tab.rows[r]
            j = min((k for k in row if k not in art_cols), default=None)
            if j is None:
                del tab.rows[r], tab.rhs[r], tab.basis[r]
                continue
            tab.pivot(r, j)
        r += 1
    for row in tab.rows:
        for k in art_cols:
            row.pop(k, None)

    # phase 2
    c = {j: _Q(a) for j, a in lp.objective.items()}
    d = dict(c)
    val = _Q(0)
    for r, b in enumerate(tab.basis):
        cb = c.get(b)
        if cb:
            for k, v in tab.rows[r].items():
                d[k] = d.get(k, 0) - cb * v
            val += cb * tab.rhs[r]
    tab.d = {k: v for k, v in d.items() if v}
    tab.val = val
    if tab.run(lambda k: k not in art_cols) is not None:
        return LPResult("unbounded", None, None, tab.pivots)
    x = [ZERO] * n
    for r, b in enumerate(tab.basis):
        if b < n:
            x[b] = _frac(tab.rhs[r])
    cert = Feasible(tuple(x))
    assert cert.verify(lp), "internal error: primal solution failed to verify"
    value = sum((a * x[j] for j, a in lp.objective.items()), ZERO)
    assert value == _frac(tab.val)
    return LPResult("optimal", value, cert, tab.pivots)


# ---------------------------------------------------------------------------
# allocation programs

@dataclass
class AllocationProgram:
    """LP over x_t(c) = mu(t) q(c, t) with per-state polytope rows."""

    lp: LinearProgram
    var: dict  # (state, coord) -> variable index
    inst: Instance

    def interim_expr(self, key) -> dict:
        """Coefficients of Q(key) * mu(key) in terms of the variables."""
        c = self.inst.key_coord(key)
        return {self.var[t, c]: 1 for t in self.inst.states_with(key) if (t, c) in self.var}

    def allocation(self, x: Sequence[Fraction]) -> AllocationRule:
        inst = self.inst
        table = {}
        for t in inst.states:
            p = inst.prior.prob(t)
            table[t] = [x[self.var[t, c]] / p for c in range(inst.n_coords)]
        return AllocationRule(inst.n_coords, table)


def allocation_program(inst: Instance, poly,
                       max_variables: int = DEFAULT_MAX_VARIABLES) -> AllocationProgram:
    n_vars = len(inst.states) * inst.n_coords
    if n_vars > max_variables:
        raise CapExceeded(f"{n_vars} LP variables exceed cap {max_variables}")
    lp = LinearProgram()
    var = {}
    for t in inst.states:
        for c in range(inst.n_coords):
            var[t, c] = lp.add_var(("x", t, inst.coords[c]))
    for t in inst.states:
        p = inst.prior.prob(t)
        for coeffs, b in poly.halfspaces(t):
            row = {var[t, c]: a for c, a in enumerate(coeffs) if a}
            if row:
                lp.add_constraint(row, LE, p * b, name=("poly", t))
            elif b < 0:
                lp.add_constraint({}, LE, b, name=("poly", t))
    return AllocationProgram(lp, var, inst)


@dataclass(frozen=True)
class Realization:
    """Outcome of the realizability oracle.

    ``allocation`` is a witness rule when ``feasible``; otherwise
    ``separator`` is a normalized weight vector with
    ``separator(Q) > max over realizable Q' of separator(Q')``, and
    ``separator_value``/``separator_bound`` are those two numbers.
    """

    feasible: bool
    allocation: Optional[AllocationRule] = None
    separator: Optional[dict] = None
    separator_value: Optional[Fraction] = None
    separator_bound: Optional[Fraction] = None
    multipliers: Optional[tuple] = None
    lp: Optional[LinearProgram] = None

    def __bool__(self):
        return self.feasible


def realizable(Q: Interim, inst: Instance, poly, *,
               max_variables: int = DEFAULT_MAX_VARIABLES,
               max_bits: int = DEFAULT_MAX_BITS) -> Realization:
    """Decide whether some feasible allocation rule induces ``Q``."""
    for key in Q:
        if key not in inst.key_index:
            raise ValueError(f"interim key {key!r} is not in TStar")
    prog = allocation_program(inst, poly, max_variables)
    lp = prog.lp
    first_interim = len(lp.constraints)
    for key in inst.tstar:
        lp.add_constraint(prog.interim_expr(key), EQ, Q[key] * inst.key_mass[key],
                          name=("interim", key))
    res = solve(lp, max_bits=max_bits)
    if res.status == "optimal":
        return Realization(True, allocation=prog.allocation(res.certificate.values), lp=lp)
    y = res.certificate.multipliers
    # lambda(key) = -y_key * mu(key) separates Q from the realizable set
    ys = {key: y[first_interim + j] for j, key in enumerate(inst.tstar)}
    scale_ = max((abs(v) for v in ys.values()), default=ZERO)
    if not scale_:
        # only the polytope rows are contradictory (empty polytope)
        return Realization(False, multipliers=y, lp=lp)
    lam = {key: -v * inst.key_mass[key] / scale_ for key, v in ys.items() if v}
    value = sum((lam[k] * Q[k] for k in lam), ZERO)
    bound = sum((yr * c.rhs for yr, c in zip(y[:first_interim], lp.constraints)), ZERO) / scale_
    return Realization(False, separator=lam, separator_value=value,
                       separator_bound=bound, multipliers=y, lp=lp)
