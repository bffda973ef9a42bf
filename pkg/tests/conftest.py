from fractions import Fraction as F

import pytest

from reducedform.core import Instance, Prior
from reducedform.da import PrincipalPriority


def single_item_two_by_two():
    """Single item, two agents, iid uniform types H/L."""
    return Instance.general(["u1", "u2"], Prior.uniform([["H", "L"], ["H", "L"]]))


def rank(s):
    """Ordinal type from digits, e.g. '213' ranks n2 > n1 > n3."""
    return tuple(f"n{c}" for c in s)


def listed_example_instance(probs=None):
    types = [[rank("123"), rank("321")], [rank("213"), rank("321")], [rank("321")]]
    margs = probs or [{types[0][0]: F(1, 2), types[0][1]: F(1, 2)},
                      {types[1][0]: F(1, 3), types[1][1]: F(2, 3)},
                      {types[2][0]: F(1)}]
    return Instance.matching(["i1", "i2", "i3"], ["n1", "n2", "n3"], Prior.product(margs))


def listed_example_listing():
    """The priority listing as (agent, type digits, item digit, blocked)."""
    return [
        ("i1", "123", 1, False), ("i1", "123", 2, True), ("i1", "123", 3, True),
        ("i2", "213", 2, False), ("i2", "213", 1, True), ("i2", "213", 3, True),
        ("i2", "321", 3, False), ("i2", "321", 2, True), ("i2", "321", 1, True),
        ("i3", "321", 3, False), ("i3", "321", 2, False), ("i3", "321", 1, True),
        ("i1", "321", 3, True), ("i1", "321", 2, True), ("i1", "321", 1, False),
    ]


def listed_example_priority(inst):
    keys = [(i, rank(tau), f"n{n}") for i, tau, n, _ in listed_example_listing()]
    return PrincipalPriority(inst, keys)


@pytest.fixture
def listed_example():
    inst = listed_example_instance()
    return inst, listed_example_priority(inst)


@pytest.fixture
def single_item():
    return single_item_two_by_two()


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
