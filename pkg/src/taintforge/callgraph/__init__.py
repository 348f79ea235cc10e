from .typeinfo import ANY, TypeInfo, TypeTable, classes, infer_types, join, scalar
from .graph import (
    CallGraph, CallTarget, KIND_EXPLICIT, KIND_MAGIC, KIND_VAR_BOTH,
    KIND_VAR_CLASS, KIND_VAR_METHOD, SiteRecord, build_callgraph,
)
