import random
from fractions import Fraction as F

import pytest

from conftest import single_item_two_by_two
from reducedform.border import PriorityOrder
from reducedform.core import Interim, WeightVector, scale
from reducedform.cover import (
    CoverCandidate, CoverEntry, approx_membership, band_lambda, entry_lambdas,
    expost_greedy_entries, lift_expost_cover, matching_cover, polymatroid_cover,
    support_value, support_value_lp, validate_cover,
)
from reducedform.generators import (
    random_general_instance, random_interims, random_matching_instance, random_submodular,
)
from reducedform.lp import realizable
from reducedform.matching import greedy_vector
from reducedform.polytopes import ConstraintFunction, MatchingPolytope, Polymatroid

UNIT = ConstraintFunction.unit_supply(2)


def test_support_value_matches_joint_lp():
    rng = random.Random(4)
    for _ in range(10):
        inst = random_matching_instance(rng, 2, 2, 2, independent=False)
        poly = MatchingPolytope.for_instance(inst)
        lam = WeightVector({k: F(rng.randint(-3, 3), 4) * inst.key_mass[k] for k in inst.tstar})
        assert support_value(lam, inst, poly).value == support_value_lp(lam, inst, poly)


def test_band_lambda_shape(single_item):
    R = PriorityOrder.identity(single_item)
    lam = band_lambda(single_item, R, 1, 3)
    signs = [lam[k] / single_item.key_mass[k] for k in R.keys]
    assert signs == [1, 0, 0, -1]
    assert len(entry_lambdas(single_item, R, 2)) == 3 * 3


def test_polymatroid_cover_is_valid(single_item):
    assert validate_cover(polymatroid_cover(single_item, UNIT), single_item, Polymatroid(UNIT))


def test_false_cover_rejected(single_item):
    R = PriorityOrder.identity(single_item)
    bad = CoverCandidate(1, [CoverEntry(Interim(), entry_lambdas(single_item, R, 4))])
    v = validate_cover(bad, single_item, Polymatroid(UNIT))
    assert not v and v.info["value"] < v.info["support"]


def test_cover_factor_range():
    with pytest.raises(ValueError):
        CoverCandidate(0)
    with pytest.raises(ValueError):
        CoverCandidate(F(3, 2))


def test_polymatroid_membership_equals_realizability():
    rng = random.Random(8)
    inst = random_general_instance(rng, 2, 2)
    C = random_submodular(rng, inst)
    poly = Polymatroid(C)
    cover = polymatroid_cover(inst, C)
    for Q in random_interims(rng, inst, poly, 40):
        assert bool(approx_membership(Q, cover, inst, poly)) == realizable(Q, inst, poly).feasible


def test_matching_cover_half():
    rng = random.Random(9)
    inst = random_matching_instance(rng, 2, 2, 1)
    poly = MatchingPolytope.for_instance(inst)
    cover = matching_cover(inst)
    assert cover.alpha == F(1, 2)
    assert validate_cover(cover, inst, poly)
    hits = 0
    for _ in range(60):
        Q = Interim({k: F(rng.randint(0, 4), 4) for k in inst.tstar})
        if approx_membership(Q, cover, inst, poly):
            hits += 1
            assert realizable(scale(Q, F(1, 2)), inst, poly).feasible
    assert hits


def test_lifted_expost_cover_matches_direct():
    rng = random.Random(1)
    inst = random_matching_instance(rng, 2, 2, 1)
    poly = MatchingPolytope.for_instance(inst)
    orders = list(PriorityOrder.all_orders(inst))
    entries = expost_greedy_entries(inst, lambda R, t, k: greedy_vector(R, inst, t, k), orders)
    lifted = lift_expost_cover(inst, poly, entries, F(1, 2))
    assert validate_cover(lifted, inst, poly)
    direct = matching_cover(inst, orders)
    assert [e.point for e in lifted.entries] == [e.point for e in direct.entries]
