"""Dual-channel taint lattice, transfer rules, and the interprocedural engine."""
from .lattice import (
    CLEAN, MU, PARTIAL, SAFE, TAINTED, TAU, Hop, ParamRoot, Prov, SourceRoot,
    SymKey, TaintTriplet, VarTaint, chain_hops, consistent, extend,
    from_elements, join_taint, join_taints, join_triplet, root_of,
    scalar_triplet, splice, tainted_both,
)
from .engine import (
    FixpointBudgetExceeded, PathPoint, SinkEvent, Summary, TaintEngine,
    TaintPath, TaintResult, analyze_taint, format_value_taints,
)
from . import transfer

__all__ = [
    "CLEAN", "MU", "PARTIAL", "SAFE", "TAINTED", "TAU", "Hop", "ParamRoot",
    "Prov", "SourceRoot", "SymKey", "TaintTriplet", "VarTaint", "chain_hops",
    "consistent", "extend", "from_elements", "join_taint", "join_taints",
    "join_triplet", "root_of", "scalar_triplet", "splice", "tainted_both",
    "FixpointBudgetExceeded", "PathPoint", "SinkEvent", "Summary",
    "TaintEngine", "TaintPath", "TaintResult", "analyze_taint",
    "format_value_taints", "transfer",
]
