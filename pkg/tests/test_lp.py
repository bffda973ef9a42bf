import random
from fractions import Fraction as F

import pytest

from conftest import single_item_two_by_two
from reducedform.core import Interim, interim_of
from reducedform.generators import (
    random_feasible_rule, random_general_instance, random_matching_instance, random_submodular,
)
from reducedform.lp import EQ, GE, LE, LinearProgram, realizable, solve
from reducedform.polytopes import ConstraintFunction, MatchingPolytope, Polymatroid, capacity


def test_max_x_bounded():
    lp = LinearProgram()
    x = lp.add_var()
    lp.add_constraint({x: 1}, LE, 1)
    lp.set_objective({x: 1})
    r = solve(lp)
    assert r.status == "optimal" and r.value == 1 and r.certificate.verify(lp)


def test_infeasible_has_valid_farkas():
    lp = LinearProgram()
    x = lp.add_var()
    lp.add_constraint({x: 1}, LE, 0)
    lp.add_constraint({x: 1}, GE, 1)
    r = solve(lp)
    assert r.status == "infeasible" and r.certificate.verify(lp)


def test_unbounded_reported():
    lp = LinearProgram()
    x = lp.add_var()
    lp.set_objective({x: 1})
    assert solve(lp).status == "unbounded"


def test_matching_lp_value_equals_capacity():
    lp = LinearProgram()
    m = MatchingPolytope(2, 2)
    xs = [lp.add_var() for _ in range(4)]
    for a, b in m.halfspaces():
        lp.add_constraint({xs[j]: c for j, c in enumerate(a)}, LE, b)
    lp.set_objective({x: 1 for x in xs})
    assert solve(lp).value == 2 == capacity(m, [(i, n) for i in range(2) for n in range(2)])


def random_lp(rng):
    lp = LinearProgram()
    xs = [lp.add_var() for _ in range(rng.randint(2, 5))]
    for _ in range(rng.randint(2, 6)):
        lp.add_constraint({x: rng.randint(-2, 4) for x in xs}, rng.choice([LE, LE, GE, EQ]),
                          rng.randint(0, 6))
    for x in xs:
        lp.add_constraint({x: 1}, LE, 5)
    lp.set_objective({x: rng.randint(-3, 3) for x in xs})
    return lp


def test_permutation_invariance_and_certificates():
    rng = random.Random(11)
    for _ in range(150):
        lp = random_lp(rng)
        r = solve(lp)
        rows = list(range(len(lp.constraints)))
        cols = list(range(lp.n_vars))
        rng.shuffle(rows)
        rng.shuffle(cols)
        r2 = solve(lp.permuted(rows, cols))
        assert r.status == r2.status and r.value == r2.value
        assert r.certificate.verify(lp)


def test_zero_interim_realizable():
    inst = single_item_two_by_two()
    r = realizable(Interim(), inst, Polymatroid(ConstraintFunction.unit_supply(2)))
    assert r.feasible and interim_of(r.allocation, inst) == Interim()


def test_three_quarters_single_item_infeasible():
    inst = single_item_two_by_two()
    Q = Interim({k: F(3, 4) for k in inst.tstar})
    r = realizable(Q, inst, Polymatroid(ConstraintFunction.unit_supply(2)))
    assert not r.feasible
    Infeasible = type(solve(r.lp).certificate)
    assert Infeasible(r.multipliers).verify(r.lp)
    assert r.separator_value == F(3, 2) and r.separator_bound == 1


def test_interim_of_feasible_rule_is_realizable():
    rng = random.Random(5)
    done = 0
    while done < 200:
        if done % 2:
            inst = random_matching_instance(rng, rng.randint(1, 3), rng.randint(1, 3), 2)
            poly = MatchingPolytope.for_instance(inst)
        else:
            inst = random_general_instance(rng, rng.randint(2, 3), 2, independent=bool(done % 4))
            poly = Polymatroid(random_submodular(rng, inst))
        q = random_feasible_rule(rng, inst, poly)
        Q = interim_of(q, inst)
        r = realizable(Q, inst, poly)
        assert r.feasible
        assert interim_of(r.allocation, inst) == Q
        assert all(poly.contains(t, r.allocation.at(t)) for t in inst.states)
        done += 1


def test_separator_certifies_unrealizable():
    rng = random.Random(2)
    inst = random_general_instance(rng, 3, 2)
    poly = Polymatroid(ConstraintFunction.unit_supply(3))
    Q = Interim({k: F(1, 2) for k in inst.tstar})
    r = realizable(Q, inst, poly)
    assert not r.feasible
    from reducedform.core import WeightVector
    from reducedform.cover import support_value
    lam = WeightVector(r.separator)
    assert lam(Q) == r.separator_value > r.separator_bound >= support_value(lam, inst, poly).value
