import itertools
import random
from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

from reducedform.polytopes import (
    ConstraintFunction, Explicit, MatchingPolytope, Polymatroid, capacity, contains,
    extreme_points, matching_capacity_function, max_weight_matching,
    max_weight_matching_bruteforce, maximize_linear,
)

T = ()


def all_variants():
    return [Polymatroid(ConstraintFunction.unit_supply(3)), MatchingPolytope(2, 2),
            Explicit.public_goods(2, 2)]


@pytest.mark.parametrize("poly", all_variants(), ids=repr)
def test_zero_is_contained(poly):
    assert contains(poly, T, [0] * poly.dim)


def test_matching_membership():
    m = MatchingPolytope(2, 2)
    assert contains(m, T, [1, 0, 0, 1])
    assert not contains(m, T, [1, F(1, 2), 0, 0])


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        contains(MatchingPolytope(2, 2), T, [0, 0, 0])


@pytest.mark.parametrize("poly", all_variants(), ids=repr)
def test_nonpositive_weights_give_zero(poly):
    v, rho = maximize_linear(poly, T, [-1] * poly.dim)
    assert v == 0 and not any(rho)


def test_matching_all_ones_value_two():
    assert maximize_linear(MatchingPolytope(2, 2), T, [1, 1, 1, 1])[0] == 2


def test_unit_supply_top_takes_all():
    v, rho = maximize_linear(Polymatroid(ConstraintFunction.unit_supply(2)), T, [1, F(1, 2)])
    assert v == 1 and rho == (1, 0)


def test_capacity_examples():
    m = MatchingPolytope(2, 2)
    assert capacity(m, [(0, 0), (0, 1)]) == 1
    assert capacity(m, [(0, 0), (0, 1), (1, 0)]) == 2
    assert capacity(m, []) == 0


def test_matching_capacity_is_not_submodular():
    C = matching_capacity_function(2, 2)
    a, b = C.submodularity_violation(T)
    assert (a, b) == (0b0011, 0b0101)
    assert C.value(a, T) == C.value(b, T) == C.value(a & b, T) == 1
    assert C.value(a | b, T) == 2


def test_extreme_point_counts():
    assert sorted(extreme_points(MatchingPolytope(1, 1), T)) == [(0,), (1,)]
    assert len(extreme_points(MatchingPolytope(2, 2), T)) == 7
    pts = extreme_points(Polymatroid(ConstraintFunction.unit_supply(2)), T)
    assert sorted(pts) == [(0, 0), (0, 1), (1, 0)]


@pytest.mark.parametrize("poly", all_variants() + [Polymatroid(ConstraintFunction.capped_cardinality(3, F(3, 2)))],
                         ids=repr)
def test_extreme_points_are_feasible_and_not_midpoints(poly):
    pts = extreme_points(poly, T)
    assert all(contains(poly, T, p) for p in pts)
    s = set(pts)
    for p, q in itertools.combinations(pts, 2):
        mid = tuple((a + b) / 2 for a, b in zip(p, q))
        assert mid not in s


def test_explicit_requires_zero():
    with pytest.raises(ValueError):
        Explicit(1, [((1,), -1)]).halfspaces(T)


def test_constraint_function_guards():
    with pytest.raises(ValueError):
        ConstraintFunction(lambda A, t: 1, 2).value(0, T)
    with pytest.raises(ValueError):
        ConstraintFunction(lambda A, t: -1 if A else 0, 2).value(1, T)


def test_polymatroid_greedy_marginals():
    assert ConstraintFunction.unit_supply(2).greedy(T, [0, 1]) == (1, 0)
    assert ConstraintFunction.capped_cardinality(2, F(3, 2)).greedy(T, [0, 1]) == (1, F(1, 2))
    half = ConstraintFunction(lambda A, t: F(len(A), 2), 2, True)
    assert half.greedy(T, [1, 0]) == (F(1, 2), F(1, 2))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(-3, 6), min_size=9, max_size=9))
def test_matching_maximize_equals_explicit_lp(ws):
    m = MatchingPolytope(3, 3)
    gamma = [F(w, 2) for w in ws]
    ex = Explicit(9, m.halfspaces(T))
    assert m.maximize(T, gamma)[0] == ex.maximize(T, gamma)[0]


def test_max_weight_matching_vs_bruteforce():
    rng = random.Random(7)
    for _ in range(300):
        n_i, n_n = rng.randint(1, 4), rng.randint(1, 4)
        w = [[F(rng.randint(-2, 5)) for _ in range(n_n)] for _ in range(n_i)]
        v, pairs = max_weight_matching(w)
        assert v == max_weight_matching_bruteforce(w)
        assert sum(w[i][n] for i, n in pairs) == v


def test_capacity_monotone():
    rng = random.Random(3)
    m = MatchingPolytope(3, 3)
    cells = [(i, n) for i in range(3) for n in range(3)]
    for _ in range(200):
        X = {c for c in cells if rng.random() < 0.5}
        Y = X | {c for c in cells if rng.random() < 0.3}
        assert capacity(m, X) <= capacity(m, Y)


def test_polymatroid_lp_fallback_for_nonsubmodular():
    C = matching_capacity_function(2, 2)
    p = Polymatroid(C)
    gamma = [1, 1, 1, 0]
    assert p.maximize(T, gamma)[0] == Explicit(4, p.halfspaces(T)).maximize(T, gamma)[0]
