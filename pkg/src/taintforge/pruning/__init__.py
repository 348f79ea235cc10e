"""Feasibility pruning for reported flows.

A reported flow is only real if some attacker-supplied string can both
satisfy every branch condition along the flow and still look like a URL
when it reaches the sink.  This package extracts those branch conditions,
translates the string-shaped ones into constraints, and drops flows whose
constraint set is unsatisfiable.
"""
from .conditions import (
    Compare, ConstRef, Empty, ExternalRef, FormalRef, FuncCheck, ListRef,
    OpaqueCond, PathCondition, REQUIRED_FALSE, REQUIRED_TRUE, TaintRef,
    TraversalBudgetExceeded, extract, extract_conditions,
)
from .checker import (
    CheckerTimeout, KeptPath, PruneVerdict, PrunedPath, check_always_unsat,
    check_url_rejection, prune_paths,
)
from .translate import RegexUnsupported, StringConstraint, translate_condition
from . import smt

__all__ = [
    "Compare", "ConstRef", "Empty", "ExternalRef", "FormalRef", "FuncCheck",
    "ListRef", "OpaqueCond", "PathCondition", "REQUIRED_FALSE",
    "REQUIRED_TRUE", "TaintRef", "TraversalBudgetExceeded", "extract",
    "extract_conditions", "CheckerTimeout", "KeptPath", "PruneVerdict",
    "PrunedPath",
    "check_always_unsat", "check_url_rejection", "prune_paths",
    "RegexUnsupported", "StringConstraint", "translate_condition", "smt",
]
