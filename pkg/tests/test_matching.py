import random
from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

from conftest import rank
from reducedform.border import PriorityOrder, r_fosd_dominates
from reducedform.core import AllocationRule, Instance, Interim, Prior, ex_ante_mass, interim_of, scale
from reducedform.generators import (
    random_feasible_rule, random_halfbound_case, random_integral_matching_rule,
    random_matching_instance,
)
from reducedform.matching import (
    bm_check, bm_max_scale, cdf_dominates, greedy_matching, greedy_state, half_char_verify,
    halfbound_check, pair_set_capacity, partial_fosd_truncation, projection, projection_covers,
    sample_bm_feasible, tighten, truncate_greedy,
)
from reducedform.polytopes import MatchingPolytope, capacity


def two_by_two(n_types=1):
    types = [rank("12"), rank("21")][:n_types]
    return Instance.matching(["i1", "i2"], ["n1", "n2"], Prior.uniform([types, types]))


def test_capacity_is_not_submodular():
    m = MatchingPolytope(2, 2)
    A = {(0, 0), (0, 1)}
    B = {(0, 0), (1, 0)}
    assert capacity(m, A) == 1 and capacity(m, B) == 1
    assert capacity(m, A | B) == 2 and capacity(m, A & B) == 1
    assert capacity(m, A) + capacity(m, B) < capacity(m, A | B) + capacity(m, A & B)


def test_greedy_state_skips_taken_items():
    inst = two_by_two()
    R = PriorityOrder.identity(inst)
    t = inst.states[0]
    acc = greedy_state(R, inst, t)
    assert len({i for i, _, _ in acc}) == len(acc) == len({n for _, _, n in acc}) == 2
    assert truncate_greedy(R, 0, inst) == Interim()
    with pytest.raises(ValueError):
        truncate_greedy(R, len(R) + 1, inst)


def test_bm_zero_and_full():
    inst = two_by_two()
    assert bm_check(Interim(), inst)
    full = Interim({k: F(1) for k in inst.tstar})
    v = bm_check(full, inst)
    assert not v and v.info["lhs"] > v.info["rhs"]
    assert bm_max_scale(full, inst) == F(1, 2)


def test_bm_rejects_general_instance(single_item):
    with pytest.raises(ValueError):
        bm_check(Interim(), single_item)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_bm_necessity(seed):
    rng = random.Random(seed)
    inst = random_matching_instance(rng, rng.randint(1, 3), rng.randint(1, 3), rng.randint(1, 2))
    q = random_feasible_rule(rng, inst) if seed % 2 else random_integral_matching_rule(rng, inst)
    assert bm_check(interim_of(q, inst), inst)


def test_halfbound_examples():
    assert halfbound_check(set(), set())
    assert halfbound_check({(0, 0)}, {(0, 0), (0, 1), (1, 0)})
    v = halfbound_check({(0, 0)}, {(0, 0), (0, 1), (1, 0), (1, 1)}, strict=False)
    assert v and v.info["mass"] == 1 and v.info["capacity"] == 2 and not v.info["covers"]
    assert not projection_covers(set(), {(0, 0)})
    with pytest.raises(ValueError):
        halfbound_check({(0, 0)}, {(1, 1)})
    with pytest.raises(ValueError):
        halfbound_check({(0, 0), (0, 1)}, {(0, 0)})


def test_projection_uses_matched_pairs_inside_the_set():
    rho, a = {(0, 0)}, {(0, 1), (1, 0)}
    assert projection_covers(rho, a, within=False)
    assert not projection_covers(rho, a)
    # covering by outside pairs would break the half bound here
    v = halfbound_check(rho, a, strict=False)
    assert not v and v.info["capacity"] == 2 and v.info["mass"] == 0


def test_projection_covers():
    assert projection_covers({(0, 0)}, set())
    pr = projection({(0, 0)}, {(0, 0), (1, 1)})
    assert pr["rows"] == {0} and pr["cols"] == {0}
    assert not projection_covers({(0, 0)}, {(0, 0), (1, 1)})
    assert pair_set_capacity({(0, 0), (1, 1), (0, 1)}) == 2


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_halfbound_fuzz(seed):
    rho, a = random_halfbound_case(random.Random(seed))
    assert projection_covers(rho, a)
    assert halfbound_check(rho, a)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_greedy_projection_covers_prefix(seed):
    rng = random.Random(seed)
    inst = random_matching_instance(rng, rng.randint(1, 3), rng.randint(1, 3), 2)
    R = PriorityOrder.shuffled(inst, rng)
    t = rng.choice(inst.states)
    realized = [key for key in R.keys if t[inst.carrier_index(key[0])] == key[1]]
    k = rng.randint(0, len(realized))
    a = {(inst.carrier_index(i), inst.items.index(n)) for i, _, n in realized[:k]}
    rho = {(inst.carrier_index(i), inst.items.index(n)) for i, _, n in greedy_state(R, inst, t)}
    assert projection_covers(rho, a)


def test_half_modes_on_zero_and_feasible():
    rng = random.Random(2)
    inst = random_matching_instance(rng, 2, 2, 1)
    Qf = interim_of(random_feasible_rule(rng, inst), inst)
    for Q in (Interim(), Qf):
        for mode in ("fosd_all_orders", "convex_hull_lp", "realizable_half"):
            assert half_char_verify(Q, inst, mode), mode
    with pytest.raises(ValueError):
        half_char_verify(Interim(), inst, "bogus")


def test_half_fosd_on_bm_samples():
    rng = random.Random(6)
    inst = random_matching_instance(rng, 2, 2, 1)
    qs, _ = sample_bm_feasible(inst, rng, 10, grid=4)
    for Q in qs:
        assert half_char_verify(Q, inst, "fosd_all_orders")
        assert half_char_verify(Q, inst, "realizable_half")


def test_frontier_samples_sit_on_boundary():
    rng = random.Random(7)
    inst = random_matching_instance(rng, 2, 2, 1)
    qs, _ = sample_bm_feasible(inst, rng, 5, to_frontier=True)
    for Q in qs:
        assert bm_check(Q, inst)


def test_tighten_zero():
    inst = two_by_two()
    r = tighten(Interim(), PriorityOrder.identity(inst), inst)
    assert r.alpha == 0 and r.ell == 0


def test_tighten_equal_mass_gives_half():
    inst = two_by_two()
    R = PriorityOrder.identity(inst)
    QR = greedy_matching(R, inst)[1]
    r = tighten(QR, R, inst)
    assert r.alpha == F(1, 2)
    assert r_fosd_dominates(r.Qhat, scale(QR, F(1, 2)), R, inst)


def test_tighten_full_scale_alpha_at_most_half():
    inst = two_by_two(2)
    R = PriorityOrder.identity(inst)
    perfect = AllocationRule(inst.n_coords, {t: (F(1), F(0), F(0), F(1)) for t in inst.states})
    Q = interim_of(perfect, inst)
    assert ex_ante_mass(Q, inst) == 2
    r = tighten(Q, R, inst)
    assert r.alpha <= F(1, 2)
    assert r_fosd_dominates(r.Qhat, scale(Q, F(1, 2)), R, inst)


def test_partial_fosd_truncation_cut():
    H, j = partial_fosd_truncation([1, 1, 1, 1], F(1, 2))
    assert j == 1 and H == [1, 1, 0, 0]
    assert cdf_dominates([1, 0], [0, 1]) and not cdf_dominates([0, 1], [1, 0])


@settings(max_examples=300, deadline=None)
@given(st.lists(st.integers(0, 9), min_size=1, max_size=8), st.integers(1, 10 ** 6))
def test_partial_fosd_truncation_dominance(atoms, seed):
    rng = random.Random(seed)
    Fm = [F(a) for a in atoms]
    total = sum(Fm)
    if total == 0:
        return
    alpha = F(rng.randint(1, 8), 8)
    # G: push alpha-scaled F mass toward the end of the order
    G = [alpha * x for x in Fm]
    for _ in range(rng.randint(0, 5)):
        s, d = sorted(rng.sample(range(len(G)), 2)) if len(G) > 1 else (0, 0)
        move = G[s] * F(rng.randint(0, 4), 4)
        G[s] -= move
        G[d] += move
    assert cdf_dominates(Fm, G) and sum(G) == alpha * total
    H, _ = partial_fosd_truncation(Fm, alpha)
    assert cdf_dominates(H, G)
