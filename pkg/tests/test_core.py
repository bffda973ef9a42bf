from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

from conftest import listed_example_instance, single_item_two_by_two
from reducedform.core import (
    AllocationRule, CapExceeded, Instance, InstanceError, Interim, Prior, WeightVector,
    active_set, build_instance, ex_ante_mass, interim_of, prefix_masses, scale,
)
from reducedform.generators import random_feasible_rule, random_general_instance, random_matching_instance
from reducedform.polytopes import ConstraintFunction, Polymatroid


def test_uniform_product_prior_quarters():
    inst = single_item_two_by_two()
    assert [inst.prior.prob(t) for t in inst.states] == [F(1, 4)] * 4


def test_zero_probability_type_excluded_from_tstar():
    pr = Prior.product([{"H": 1, "L": 0}, {"H": F(1, 2), "L": F(1, 2)}])
    inst = Instance.general(["u1", "u2"], pr)
    assert ("u1", "L") not in inst.key_index
    assert len(inst.tstar) == 3


def test_listed_example_tstar_has_fifteen_triples():
    assert len(listed_example_instance().tstar) == 15


def test_prior_rejects_negative_and_unnormalized():
    with pytest.raises(InstanceError):
        Prior([["a"]], {("a",): F(-1)})
    with pytest.raises(InstanceError):
        Prior([["a", "b"]], {("a",): F(1, 2)})


def test_empty_type_set_rejected():
    with pytest.raises(InstanceError):
        Instance.general(["u"], Prior([[]], {}))


def test_state_cap():
    with pytest.raises(CapExceeded):
        Instance.general(["u1", "u2"], Prior.uniform([["a", "b"], ["a", "b"]]), max_states=3)


def test_marginals_and_conditionals():
    pr = Prior(["ab", "xy"], {("a", "x"): F(1, 2), ("a", "y"): F(1, 4), ("b", "y"): F(1, 4)})
    assert pr.marginal(0, "a") == F(3, 4)
    assert pr.conditional(0, ("a", "x")) == F(2, 3)
    assert not pr.is_independent()


def test_null_allocation_gives_null_interim(single_item):
    assert interim_of(AllocationRule(2), single_item) == Interim()


def test_unresponsive_rule_interim_equals_rule(single_item):
    q = AllocationRule.constant(single_item, [F(1, 3), F(1, 2)])
    Q = interim_of(q, single_item)
    assert Q[("u1", "H")] == Q[("u1", "L")] == F(1, 3)
    assert Q[("u2", "H")] == Q[("u2", "L")] == F(1, 2)


def test_hand_enumerated_interim(single_item):
    # item to agent 1 iff t1 = H, otherwise to agent 2
    table = {t: ([1, 0] if t[0] == "H" else [0, 1]) for t in single_item.states}
    Q = interim_of(AllocationRule(2, table), single_item)
    assert Q[("u1", "H")] == 1 and Q[("u1", "L")] == 0
    assert Q[("u2", "H")] == Q[("u2", "L")] == F(1, 2)


def test_interim_rejects_infeasible_rule(single_item):
    q = AllocationRule.constant(single_item, [1, 1])
    with pytest.raises(ValueError):
        interim_of(q, single_item, Polymatroid(ConstraintFunction.unit_supply(2)))


def test_active_set(single_item):
    assert active_set(single_item, [], ("H", "H")) == set()
    assert active_set(single_item, single_item.tstar, ("H", "L")) == {"u1", "u2"}
    assert active_set(single_item, [("u1", "H"), ("u2", "L")], ("H", "H")) == {"u1"}


def test_scale():
    Q = Interim({("u", "a"): 1})
    assert scale(Q, 1) == Q
    assert scale(Q, 0) == Interim()
    assert scale(Q, F(1, 2))[("u", "a")] == F(1, 2)
    with pytest.raises(ValueError):
        scale(Q, F(3, 2))


def test_interim_rejects_negative():
    with pytest.raises(ValueError):
        Interim({("u", "a"): -1})


def test_prefix_masses_start_at_zero(single_item):
    Q = Interim({k: 1 for k in single_item.tstar})
    pm = prefix_masses(Q, single_item.tstar, single_item)
    assert pm[0] == 0 and pm[-1] == 2


def test_weight_vector_normalization(single_item):
    lam = WeightVector({("u1", "H"): F(1, 2)})
    assert lam.is_normalized(single_item)
    assert not WeightVector({("u1", "H"): 1}).is_normalized(single_item)
    assert lam.conditional(single_item, ("H", "L")) == (1, 0)


def test_build_instance_from_description():
    inst = build_instance({"kind": "general", "units": ["a", "b"], "types": [["x"], ["y", "z"]],
                           "prior": {"independent": True,
                                     "marginals": [[["x", "1"]], [["y", "1/2"], ["z", "1/2"]]]}})
    assert len(inst.states) == 2


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.fractions(0, 1))
def test_interim_is_linear(seed, beta):
    import random
    rng = random.Random(seed)
    inst = random_matching_instance(rng, 2, 2, 2) if seed % 2 else random_general_instance(rng, 2, 2)
    poly = None
    if inst.kind == "general":
        poly = Polymatroid(ConstraintFunction.capped_cardinality(2, F(3, 2)))
    q1, q2 = random_feasible_rule(rng, inst, poly), random_feasible_rule(rng, inst, poly)
    lhs = interim_of(q1.mix(q2, beta), inst)
    a, b = interim_of(q1, inst), interim_of(q2, inst)
    assert all(lhs[k] == beta * a[k] + (1 - beta) * b[k] for k in inst.tstar)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_ex_ante_mass_conservation(seed):
    import random
    rng = random.Random(seed)
    inst = random_matching_instance(rng, 2, 3, 2, independent=bool(seed % 2))
    q = random_feasible_rule(rng, inst)
    Q = interim_of(q, inst)
    assert ex_ante_mass(Q, inst) == sum(inst.prior.prob(t) * sum(q.at(t)) for t in inst.states)


def test_unresponsive_round_trip(single_item):
    vec = [F(1, 4), F(3, 4)]
    Q = interim_of(AllocationRule.constant(single_item, vec), single_item)
    rebuilt = AllocationRule.constant(single_item, [Q[("u1", "H")], Q[("u2", "H")]])
    assert rebuilt == AllocationRule.constant(single_item, vec)
