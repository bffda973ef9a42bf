import itertools
import random
from fractions import Fraction as F

import pytest

from conftest import listed_example_instance, listed_example_listing, listed_example_priority, rank
from reducedform.border import PriorityOrder
from reducedform.core import Instance, Interim, Prior
from reducedform.da import (
    MaxMin, PiecewiseLinear, PrincipalPriority, RankDependent, Utilitarian, blocked,
    blocking_pairs, da_guarantee_check, deferred_acceptance, dsic_check,
    full_information_benchmark, greedy_equals_da, is_item_ranking_consistent, is_welfarist,
    lexicographic_priority, monotonicity_certificate, prefers, stable_matchings,
)
from reducedform.generators import (
    monotone_weights, random_interleaving_priority, random_matching_instance,
    random_welfarist_irc_priority,
)
from reducedform.matching import greedy_matching


def check_all(inst, p):
    assert is_welfarist(p, inst)
    irc = is_item_ranking_consistent(p, inst)
    assert irc
    v = greedy_equals_da(p, inst)
    assert v and v.info["states"] == 4
    return irc.info["rankings"]


def test_listed_example_blocked_flags(listed_example):
    inst, p = listed_example
    for (i, tau, n, flag), key in zip(listed_example_listing(), p.keys):
        assert blocked(p, key, inst) == flag, key


def test_listed_example_properties(listed_example):
    inst, p = listed_example
    rankings = check_all(inst, p)
    assert rankings["n1"] == ["i1", "i2", "i3"]
    assert rankings["n2"] == ["i2", "i3", "i1"]
    assert rankings["n3"] == ["i2", "i3", "i1"]


def test_listed_example_segment_move(listed_example):
    inst, p = listed_example
    segment = p.keys[:3]
    q = p.moved(segment, after=("i3", rank("321"), "n1"))
    assert q.keys[9:12] == segment
    for (i, tau, n, flag) in listed_example_listing():
        assert blocked(q, (i, rank(tau), f"n{n}")) == flag
    assert check_all(inst, q)["n3"] == ["i2", "i3", "i1"]


def test_listed_example_flags_stable_across_priors():
    inst = listed_example_instance()
    post = listed_example_instance([{rank("123"): F(1, 5), rank("321"): F(4, 5)},
                                {rank("213"): F(3, 4), rank("321"): F(1, 4)},
                                {rank("321"): F(1)}])
    assert listed_example_priority(inst).unblocked == listed_example_priority(post).unblocked


def test_prefers():
    tau = rank("213")
    assert prefers(tau, "n2", "n1") and not prefers(tau, "n1", "n2")
    assert prefers(tau, "n3", None) and not prefers(tau, None, "n3")
    assert not prefers(tau, "n1", "n1")


def test_deferred_acceptance_textbook():
    prefs = {"a": ["x", "y"], "b": ["x", "y"]}
    pri = {"x": ["b", "a"], "y": ["a", "b"]}
    m = deferred_acceptance(prefs, pri)
    assert m == {"a": "y", "b": "x"}
    assert not blocking_pairs(m, prefs, pri)


def test_non_welfarist_detected():
    inst = Instance.matching(["i1"], ["n1", "n2"], Prior.uniform([[rank("12")]]))
    p = PrincipalPriority(inst, [("i1", rank("12"), "n2"), ("i1", rank("12"), "n1")])
    v = is_welfarist(p, inst)
    assert not v and v.witness[0][2] == "n2"
    with pytest.raises(ValueError):
        greedy_equals_da(p, inst)


def test_irc_violation_detected():
    types = [rank("12"), rank("21")]
    inst = Instance.matching(["i1", "i2"], ["n1", "n2"], Prior.uniform([types, types]))
    keys = [("i1", rank("12"), "n1"), ("i2", rank("12"), "n1"), ("i2", rank("21"), "n2"),
            ("i1", rank("21"), "n2"), ("i2", rank("12"), "n2"), ("i1", rank("12"), "n2"),
            ("i1", rank("21"), "n1"), ("i2", rank("21"), "n1")]
    p = PrincipalPriority(inst, keys)
    assert is_welfarist(p, inst)
    assert not is_item_ranking_consistent(p, inst)


def test_lexicographic_is_serial_dictatorship():
    rng = random.Random(3)
    inst = random_matching_instance(rng, 3, 3, 2)
    p = lexicographic_priority(inst, ["i2", "i1", "i3"])
    assert is_welfarist(p, inst) and is_item_ranking_consistent(p, inst)
    assert greedy_equals_da(p, inst) and dsic_check(p, inst)


def test_interleavings_are_welfarist():
    rng = random.Random(12)
    for _ in range(20):
        inst = random_matching_instance(rng, 3, 3, 2)
        assert is_welfarist(random_interleaving_priority(rng, inst), inst)


def test_random_welfarist_irc_priorities():
    rng = random.Random(21)
    for _ in range(5):
        inst = random_matching_instance(rng, 3, 3, 2)
        p = random_welfarist_irc_priority(rng, inst)
        assert greedy_equals_da(p, inst)
        assert dsic_check(p, inst)


def test_dsic_failure_for_arbitrary_priority():
    types = [rank("12"), rank("21")]
    inst = Instance.matching(["i1", "i2"], ["n1", "n2"], Prior.uniform([types, [rank("12")]]))
    # type 12 is handed its worse item first, so i1 gains by claiming 21
    keys = [("i1", rank("12"), "n2"), ("i1", rank("21"), "n1"), ("i2", rank("12"), "n1"),
            ("i2", rank("12"), "n2"), ("i1", rank("12"), "n1"), ("i1", rank("21"), "n2")]
    assert not dsic_check(PriorityOrder(inst, keys), inst)


def test_stable_matchings_contain_da():
    rng = random.Random(2)
    inst = random_matching_instance(rng, 3, 3, 1)
    p = lexicographic_priority(inst, list(inst.carriers))
    t = inst.states[0]
    prefs = {i: t[k] for k, i in enumerate(inst.carriers)}
    rankings = is_item_ranking_consistent(p, inst).info["rankings"]
    assert deferred_acceptance(prefs, rankings) in stable_matchings(inst, prefs, rankings)


def test_objectives_and_certificates():
    rng = random.Random(5)
    inst = random_matching_instance(rng, 2, 2, 1)
    p = lexicographic_priority(inst, list(inst.carriers))
    v = monotone_weights(rng, p)
    assert monotonicity_certificate(Utilitarian(v), p)
    rising = dict(zip(p.keys, sorted(v.values())))
    if len(set(v.values())) > 1:
        assert not monotonicity_certificate(Utilitarian(rising), p)
    f = PiecewiseLinear(((1, 1), (2, F(3, 2))))
    assert f.is_concave() and f.is_increasing() and f(3) == 2
    assert monotonicity_certificate(RankDependent(v, f), p)
    assert monotonicity_certificate(MaxMin((v, {k: 2 * x for k, x in v.items()})), p)
    Q = greedy_matching(p, inst)[1]
    assert Utilitarian(v).value(Q, inst) <= full_information_benchmark(Utilitarian(v), inst)
    assert RankDependent(v, PiecewiseLinear.identity()).value(Q, inst) >= 0


def test_rank_dependent_identity_is_utilitarian_up_to_constant():
    rng = random.Random(8)
    inst = random_matching_instance(rng, 2, 2, 1)
    p = lexicographic_priority(inst, list(inst.carriers))
    v = monotone_weights(rng, p)
    last = min(v.values())
    shifted = {k: x - last for k, x in v.items()}
    Q = greedy_matching(p, inst)[1]
    assert RankDependent(v, PiecewiseLinear.identity()).value(Q, inst) == Utilitarian(shifted).value(Q, inst)


def test_da_guarantee_on_random_priorities():
    rng = random.Random(30)
    for _ in range(3):
        inst = random_matching_instance(rng, 3, 3, 2)
        p = random_welfarist_irc_priority(rng, inst)
        obj = Utilitarian(monotone_weights(rng, p))
        v = da_guarantee_check(obj, p, inst)
        assert v and v.witness >= F(1, 2)


def test_guarantee_rejects_non_monotone_objective():
    rng = random.Random(1)
    inst = random_matching_instance(rng, 2, 2, 1)
    p = lexicographic_priority(inst, list(inst.carriers))
    v = {k: F(j) for j, k in enumerate(p.keys)}
    with pytest.raises(ValueError):
        da_guarantee_check(Utilitarian(v), p, inst)


def test_maxmin_and_rank_dependent_benchmarks():
    rng = random.Random(4)
    inst = random_matching_instance(rng, 2, 2, 1)
    p = lexicographic_priority(inst, list(inst.carriers))
    v = monotone_weights(rng, p)
    w = {k: 1 for k in p.keys}
    assert da_guarantee_check(MaxMin((v, w)), p, inst)
    f = PiecewiseLinear(((1, 1), (2, F(3, 2))))
    assert da_guarantee_check(RankDependent(v, f), p, inst)
