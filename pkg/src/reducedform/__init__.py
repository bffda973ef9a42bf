"""Exact and approximate characterizations of realizable interim allocations."""
from .core import (
    AllocationRule, CapExceeded, Instance, InstanceError, Interim, Prior, Verdict, WeightVector,
    active_set, build_instance, ex_ante_mass, interim_of, scale,
)
from .polytopes import ConstraintFunction, Explicit, MatchingPolytope, Polymatroid, capacity
from .lp import realizable, solve
from .border import PriorityOrder, border_check, greedy_allocation, r_fosd_dominates, step_lambda
from .cover import CoverCandidate, approx_membership, support_value, validate_cover
from .matching import bm_check, greedy_matching, half_char_verify, tighten
from .da import PrincipalPriority, deferred_acceptance, greedy_equals_da, is_item_ranking_consistent, is_welfarist
from .cardinal import CardinalAgent, CardinalTypeSpace, design_order, ic_check, payments_for

__version__ = "0.1.0"
