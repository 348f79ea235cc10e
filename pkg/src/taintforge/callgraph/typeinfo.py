"""Flow-insensitive local type inference over lowered functions.

Types serve one purpose here: narrowing dynamic call targets.  A value's type
is either a set of candidate classes, a scalar kind, or `any` when nothing
can be said.  `new C()` results, parameter hints, `@var`/`@param`/`@return`
annotations, and constants are the sources of information; joins union
candidate sets and collapse to `any` on conflict.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from ..frontend.project import FunctionInfo, Project
from ..ir.ssa import (
    ArrayElemAssign, ArrayElemRead, ArrayInit, Assign, Binary, CallStmt,
    CastStmt, Cfg, Const, IterValid, IterValue, Operand, ParamRef, Phi,
    PropRead, Superglobal, Unary, Value,
)

_SCALARS = {"string", "int", "float", "bool", "array", "mixed"}

_BOOL_OPS = {"==", "!=", "===", "!==", "<", ">", "<=", ">=", "<>",
             "&&", "||", "and", "or", "xor", "instanceof"}


@dataclass(frozen=True)
class TypeInfo:
    candidates: Optional[frozenset[str]] = None   # None = unknown classes
    scalar: Optional[str] = None

    @property
    def is_any(self) -> bool:
        return self.candidates is None and self.scalar is None

    def __repr__(self) -> str:
        if self.is_any:
            return "any"
        if self.scalar is not None:
            return self.scalar
        return "{" + ",".join(sorted(self.candidates or ())) + "}"


ANY = TypeInfo()


def scalar(kind: str) -> TypeInfo:
    return TypeInfo(candidates=frozenset(), scalar=kind)


def classes(*names: str) -> TypeInfo:
    return TypeInfo(candidates=frozenset(n.lower() for n in names))


def join(a: TypeInfo, b: TypeInfo) -> TypeInfo:
    if a == b:
        return a
    if a.is_any or b.is_any:
        return ANY
    if a.scalar is not None or b.scalar is not None:
        return ANY
    return TypeInfo(candidates=(a.candidates or frozenset()) | (b.candidates or frozenset()))


def from_declared(name: Optional[str]) -> TypeInfo:
    """A declared/documented type name to a TypeInfo."""
    if not name:
        return ANY
    low = name.lower().lstrip("\\")
    if low in ("mixed", "object", "callable", "void", "null", "self", "static", "iterable"):
        return ANY
    if low in _SCALARS:
        return scalar(low)
    return classes(low)


def _const_type(value: object) -> TypeInfo:
    if isinstance(value, bool):
        return scalar("bool")
    if isinstance(value, str):
        return scalar("string")
    if isinstance(value, int):
        return scalar("int")
    if isinstance(value, float):
        return scalar("float")
    if isinstance(value, tuple):
        return scalar("array")
    return ANY


class TypeTable:
    """Per-function value types plus shared project lookups."""

    def __init__(self, project: Project) -> None:
        self.project = project
        self.by_function: dict[str, dict[int, TypeInfo]] = {}

    def operand_type(self, qualified: str, op: Operand,
                     fn: Optional[FunctionInfo] = None) -> TypeInfo:
        if isinstance(op, Const):
            return _const_type(op.value)
        if isinstance(op, Superglobal):
            return scalar("array")
        if isinstance(op, ParamRef):
            if fn is None:
                return ANY
            if op.index == -1:
                return classes(fn.class_name) if fn.class_name else ANY
            if 0 <= op.index < len(fn.params):
                return from_declared(fn.params[op.index].effective_type)
            return ANY
        if isinstance(op, Value):
            return self.by_function.get(qualified, {}).get(op.id, ANY)
        return ANY

    def prop_type(self, class_key: str, prop: str) -> TypeInfo:
        for cls in self.project.ancestry(class_key):
            info = cls.props.get(prop)
            if info is not None:
                return from_declared(info.doc_type)
        return ANY

    def compatible(self, actual: TypeInfo, formal: Optional[str]) -> bool:
        """Can an actual of this type be passed where `formal` is declared?"""
        if not formal:
            return True
        low = formal.lower().lstrip("\\")
        if low in ("mixed", "object", "callable", "iterable"):
            return True
        if actual.is_any or actual.scalar == "mixed":
            return True
        if low in _SCALARS:
            if actual.scalar is None:
                return False
            if actual.scalar == low:
                return True
            return actual.scalar == "int" and low == "float"
        # formal is a class: every candidate must sit at or below it
        if not actual.candidates:
            return False
        for cand in actual.candidates:
            if cand == low:
                return True
            for cls in self.project.ancestry(cand):
                if cls.name.lower() == low or low in cls.interfaces:
                    return True
        return False


def infer_types(project: Project, cfgs: dict[str, Cfg],
                max_passes: int = 6) -> TypeTable:
    table = TypeTable(project)
    functions = {fn.qualified: fn for fn in project.all_functions()}
    for qualified, cfg in cfgs.items():
        fn = functions.get(qualified)
        table.by_function[qualified] = _infer_one(table, qualified, fn, cfg, max_passes)
    return table


def _infer_one(table: TypeTable, qualified: str, fn: Optional[FunctionInfo],
               cfg: Cfg, max_passes: int) -> dict[int, TypeInfo]:
    types: dict[int, TypeInfo] = {}
    table.by_function[qualified] = types
    project = table.project

    def op_t(op: Operand) -> TypeInfo:
        if isinstance(op, Value):
            return types.get(op.id, TypeInfo(candidates=frozenset()))  # bottom
        return table.operand_type(qualified, op, fn)

    def ret_type_of(target: Optional[FunctionInfo]) -> TypeInfo:
        if target is None or target.doc_return is None:
            return ANY
        return from_declared(target.doc_return)

    for _ in range(max_passes):
        changed = False

        def record(vid: int, t: TypeInfo) -> None:
            nonlocal changed
            if types.get(vid) != t:
                types[vid] = t
                changed = True

        for block in cfg.blocks:
            for stmt in block.stmts:
                if isinstance(stmt, Assign):
                    record(stmt.dst, op_t(stmt.src))
                elif isinstance(stmt, Unary):
                    record(stmt.dst, scalar("bool") if stmt.op == "!" else op_t(stmt.src))
                elif isinstance(stmt, Binary):
                    if stmt.op == ".":
                        record(stmt.dst, scalar("string"))
                    elif stmt.op in _BOOL_OPS:
                        record(stmt.dst, scalar("bool"))
                    elif stmt.op == "??":
                        record(stmt.dst, join(op_t(stmt.left), op_t(stmt.right)))
                    else:
                        record(stmt.dst, scalar("int"))
                elif isinstance(stmt, CastStmt):
                    if stmt.type in _SCALARS:
                        record(stmt.dst, scalar(stmt.type))
                    else:
                        record(stmt.dst, ANY)
                elif isinstance(stmt, (ArrayInit, ArrayElemAssign)):
                    dst = stmt.dst if isinstance(stmt, ArrayInit) else stmt.arr_out
                    record(dst, scalar("array"))
                elif isinstance(stmt, ArrayElemRead):
                    record(stmt.dst, ANY)
                elif isinstance(stmt, Phi):
                    joined: Optional[TypeInfo] = None
                    for src in stmt.sources:
                        t = op_t(src)
                        if t.candidates == frozenset() and t.scalar is None:
                            continue  # bottom: not yet computed
                        joined = t if joined is None else join(joined, t)
                    record(stmt.dst, joined if joined is not None else ANY)
                elif isinstance(stmt, IterValid):
                    record(stmt.dst, scalar("bool"))
                elif isinstance(stmt, IterValue):
                    record(stmt.dst, ANY)
                    if stmt.key_dst is not None:
                        record(stmt.key_dst, ANY)
                elif isinstance(stmt, PropRead):
                    if stmt.cls and not stmt.cls.startswith("<") \
                            and not stmt.cls.startswith("parent-of:"):
                        record(stmt.dst, table.prop_type(stmt.cls, stmt.prop))
                    elif stmt.receiver is not None:
                        recv_t = op_t(stmt.receiver)
                        if recv_t.candidates and len(recv_t.candidates) == 1:
                            record(stmt.dst, table.prop_type(next(iter(recv_t.candidates)),
                                                             stmt.prop))
                        else:
                            record(stmt.dst, ANY)
                    else:
                        record(stmt.dst, ANY)
                elif isinstance(stmt, CallStmt) and stmt.dst is not None:
                    if stmt.style == "new" and isinstance(stmt.class_ref, str) \
                            and not stmt.class_ref.startswith("parent-of:"):
                        record(stmt.dst, classes(stmt.class_ref))
                    elif stmt.style == "func" and stmt.func_name:
                        record(stmt.dst, ret_type_of(project.functions.get(stmt.func_name)))
                    elif stmt.style == "static" and isinstance(stmt.class_ref, str) \
                            and isinstance(stmt.method_ref, str):
                        target = None
                        for cls in project.ancestry(stmt.class_ref):
                            target = cls.methods.get(stmt.method_ref.lower())
                            if target is not None:
                                break
                        record(stmt.dst, ret_type_of(target))
                    else:
                        record(stmt.dst, ANY)
        if not changed:
            break
    return types
