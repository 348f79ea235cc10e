"""SSA-form IR: operands, statement forms, control-flow graph.

Each function lowers to a :class:`Cfg` of numbered blocks.  Value identifiers
are dense integers assigned exactly once per function.  Operands are either
SSA values, constants, superglobals, or formal-parameter references; property
state lives outside SSA in whole-object symbols addressed by PropRead /
PropWrite statements.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

from ..frontend.astnodes import Span


# ---- operands ----------------------------------------------------------

@dataclass(frozen=True)
class Value:
    id: int

    def __repr__(self) -> str:
        return f"v{self.id}"


@dataclass(frozen=True)
class Const:
    value: object = None            # str | int | float | bool | None
    symbol: Optional[str] = None    # bare-name constant spelling (CURLOPT_URL)

    def __repr__(self) -> str:
        if self.symbol is not None:
            return self.symbol
        return repr(self.value)


@dataclass(frozen=True)
class Superglobal:
    name: str   # "_GET", "_POST", ...

    def __repr__(self) -> str:
        return f"${self.name}"


@dataclass(frozen=True)
class ParamRef:
    index: int
    name: str

    def __repr__(self) -> str:
        return f"${self.name}"


Operand = Union[Value, Const, Superglobal, ParamRef]


# ---- statements --------------------------------------------------------

@dataclass
class Stmt:
    span: Span


@dataclass
class Assign(Stmt):
    dst: int
    src: Operand


@dataclass
class Unary(Stmt):
    dst: int
    op: str
    src: Operand


@dataclass
class Binary(Stmt):
    dst: int
    op: str
    left: Operand
    right: Operand


@dataclass
class CastStmt(Stmt):
    dst: int
    type: str           # int | float | bool | string | array | object
    src: Operand


@dataclass
class ArrayInit(Stmt):
    dst: int
    elems: list[tuple[Optional[Operand], Operand]]  # (key or None, value)


@dataclass
class ArrayElemAssign(Stmt):
    """Functional array update: arr_out := arr_in with [key] set to value.
    key None is an append."""
    arr_out: int
    arr_in: Operand
    key: Optional[Operand]
    value: Operand
    var_name: Optional[str] = None


@dataclass
class ArrayElemRead(Stmt):
    dst: int
    arr: Operand
    key: Operand


@dataclass
class Phi(Stmt):
    dst: int
    sources: list[Operand]
    preds: list[int] = field(default_factory=list)   # matching pred block ids


@dataclass
class CallStmt(Stmt):
    dst: Optional[int]
    style: str                       # func | method | static | new | var_func
    func_name: Optional[str] = None  # lowercased resolved name (style func)
    func_display: Optional[str] = None
    class_ref: Union[str, Operand, None] = None   # lowercased literal or operand
    method_ref: Union[str, Operand, None] = None  # literal spelling or operand
    receiver: Optional[Operand] = None
    args: list[Operand] = field(default_factory=list)
    site_id: int = -1

    def callee_label(self) -> str:
        if self.style in ("func", "var_func"):
            return self.func_display or self.func_name or "<dynamic>"
        m = self.method_ref if isinstance(self.method_ref, str) else "{expr}"
        if self.style == "new":
            cls = self.class_ref if isinstance(self.class_ref, str) else "{expr}"
            return f"new {cls}"
        if self.style == "method":
            recv = repr(self.receiver) if self.receiver is not None else "{expr}"
            return f"{recv}->{m}"
        cls = self.class_ref if isinstance(self.class_ref, str) else "{expr}"
        return f"{cls}::{m}"


@dataclass
class ReturnStmt(Stmt):
    value: Optional[Operand] = None


@dataclass
class YieldStmt(Stmt):
    value: Optional[Operand] = None


@dataclass
class IterReset(Stmt):
    arr: Operand


@dataclass
class IterValid(Stmt):
    dst: int
    arr: Operand


@dataclass
class IterValue(Stmt):
    dst: int
    arr: Operand
    key_dst: Optional[int] = None
    body_branches: bool = False      # loop body contains branching constructs


@dataclass
class JumpIf(Stmt):
    cond: Operand


@dataclass
class Jump(Stmt):
    pass


@dataclass
class ThrowStmt(Stmt):
    value: Optional[Operand] = None


@dataclass
class OpaqueStmt(Stmt):
    reads: list[Operand] = field(default_factory=list)
    writes: list[tuple[str, int]] = field(default_factory=list)  # (var name, value id)


@dataclass
class PropRead(Stmt):
    dst: int
    prop: str
    cls: Optional[str] = None             # lowercased literal class, if known
    receiver: Optional[Operand] = None    # dynamic receiver otherwise


@dataclass
class PropWrite(Stmt):
    prop: str
    src: Operand
    cls: Optional[str] = None
    receiver: Optional[Operand] = None


TERMINATORS = (JumpIf, Jump, ReturnStmt, ThrowStmt)


# ---- CFG ---------------------------------------------------------------

EDGE_TRUE = "true"
EDGE_FALSE = "false"
EDGE_UNCOND = "unconditional"


@dataclass
class Block:
    id: int
    line: int
    stmts: list[Stmt] = field(default_factory=list)
    edges: list[tuple[str, int]] = field(default_factory=list)

    def successors(self) -> list[int]:
        return [t for _, t in self.edges]


@dataclass
class Cfg:
    qualified: str                     # owning function's unique key
    display: str
    file_id: int
    params: list[tuple[str, int]]      # (name, param index)
    blocks: list[Block] = field(default_factory=list)
    value_count: int = 0
    value_names: dict[int, str] = field(default_factory=dict)  # value -> source var
    entry: int = 1
    incomplete: bool = False

    def block(self, block_id: int) -> Block:
        return self.blocks[block_id - 1]

    def predecessors(self) -> dict[int, list[tuple[int, str]]]:
        preds: dict[int, list[tuple[int, str]]] = {b.id: [] for b in self.blocks}
        for b in self.blocks:
            for label, target in b.edges:
                preds[target].append((b.id, label))
        return preds

    def def_map(self) -> dict[int, Stmt]:
        """value id -> defining statement."""
        defs: dict[int, Stmt] = {}
        for block in self.blocks:
            for stmt in block.stmts:
                for vid in defined_values(stmt):
                    defs[vid] = stmt
        return defs

    def call_sites(self) -> list[CallStmt]:
        out = []
        for block in self.blocks:
            for stmt in block.stmts:
                if isinstance(stmt, CallStmt):
                    out.append(stmt)
        return out


def defined_values(stmt: Stmt) -> list[int]:
    if isinstance(stmt, (Assign, Unary, Binary, CastStmt, ArrayInit,
                         ArrayElemRead, Phi, IterValid, PropRead)):
        return [stmt.dst]
    if isinstance(stmt, ArrayElemAssign):
        return [stmt.arr_out]
    if isinstance(stmt, IterValue):
        return [stmt.dst] + ([stmt.key_dst] if stmt.key_dst is not None else [])
    if isinstance(stmt, CallStmt):
        return [stmt.dst] if stmt.dst is not None else []
    if isinstance(stmt, OpaqueStmt):
        return [vid for _, vid in stmt.writes]
    return []


def used_operands(stmt: Stmt) -> list[Operand]:
    if isinstance(stmt, Assign):
        return [stmt.src]
    if isinstance(stmt, (Unary, CastStmt)):
        return [stmt.src]
    if isinstance(stmt, Binary):
        return [stmt.left, stmt.right]
    if isinstance(stmt, ArrayInit):
        out = []
        for key, value in stmt.elems:
            if key is not None:
                out.append(key)
            out.append(value)
        return out
    if isinstance(stmt, ArrayElemAssign):
        return [stmt.arr_in] + ([stmt.key] if stmt.key is not None else []) + [stmt.value]
    if isinstance(stmt, ArrayElemRead):
        return [stmt.arr, stmt.key]
    if isinstance(stmt, Phi):
        return list(stmt.sources)
    if isinstance(stmt, CallStmt):
        out = list(stmt.args)
        for extra in (stmt.receiver, stmt.class_ref, stmt.method_ref):
            if extra is not None and not isinstance(extra, str):
                out.append(extra)
        return out
    if isinstance(stmt, (ReturnStmt, YieldStmt, ThrowStmt)):
        return [stmt.value] if stmt.value is not None else []
    if isinstance(stmt, (IterReset, IterValid, IterValue)):
        return [stmt.arr]
    if isinstance(stmt, JumpIf):
        return [stmt.cond]
    if isinstance(stmt, OpaqueStmt):
        return list(stmt.reads)
    if isinstance(stmt, PropRead):
        return [stmt.receiver] if stmt.receiver is not None else []
    if isinstance(stmt, PropWrite):
        out = [stmt.src]
        if stmt.receiver is not None:
            out.append(stmt.receiver)
        return out
    return []


# ---- rendering ---------------------------------------------------------

def _fmt_operand(op: Operand) -> str:
    return repr(op)


def format_stmt(stmt: Stmt) -> str:
    if isinstance(stmt, Assign):
        return f"v{stmt.dst} := {_fmt_operand(stmt.src)}"
    if isinstance(stmt, Unary):
        return f"v{stmt.dst} := {stmt.op}{_fmt_operand(stmt.src)}"
    if isinstance(stmt, Binary):
        return f"v{stmt.dst} := {_fmt_operand(stmt.left)} {stmt.op} {_fmt_operand(stmt.right)}"
    if isinstance(stmt, CastStmt):
        return f"v{stmt.dst} := ({stmt.type}) {_fmt_operand(stmt.src)}"
    if isinstance(stmt, ArrayInit):
        parts = []
        for key, value in stmt.elems:
            if key is None:
                parts.append(_fmt_operand(value))
            else:
                parts.append(f"{_fmt_operand(key)} => {_fmt_operand(value)}")
        return f"v{stmt.dst} := [{', '.join(parts)}]"
    if isinstance(stmt, ArrayElemAssign):
        key = _fmt_operand(stmt.key) if stmt.key is not None else ""
        return f"v{stmt.arr_out} := {_fmt_operand(stmt.arr_in)}[{key}] <- {_fmt_operand(stmt.value)}"
    if isinstance(stmt, ArrayElemRead):
        return f"v{stmt.dst} := {_fmt_operand(stmt.arr)}[{_fmt_operand(stmt.key)}]"
    if isinstance(stmt, Phi):
        srcs = ", ".join(_fmt_operand(s) for s in stmt.sources)
        return f"v{stmt.dst} := phi({srcs})"
    if isinstance(stmt, CallStmt):
        args = ", ".join(_fmt_operand(a) for a in stmt.args)
        head = f"v{stmt.dst} := " if stmt.dst is not None else ""
        return f"{head}call {stmt.callee_label()}({args})"
    if isinstance(stmt, ReturnStmt):
        if stmt.value is None:
            return "return"
        return f"return {_fmt_operand(stmt.value)}"
    if isinstance(stmt, YieldStmt):
        return f"yield {_fmt_operand(stmt.value) if stmt.value is not None else ''}"
    if isinstance(stmt, IterReset):
        return f"IterReset({_fmt_operand(stmt.arr)})"
    if isinstance(stmt, IterValid):
        return f"v{stmt.dst} := IterValid({_fmt_operand(stmt.arr)})"
    if isinstance(stmt, IterValue):
        key = f", v{stmt.key_dst}" if stmt.key_dst is not None else ""
        return f"v{stmt.dst}{key} := IterValue({_fmt_operand(stmt.arr)})"
    if isinstance(stmt, JumpIf):
        return f"JumpIf({_fmt_operand(stmt.cond)})"
    if isinstance(stmt, Jump):
        return "Jump"
    if isinstance(stmt, ThrowStmt):
        return f"throw {_fmt_operand(stmt.value) if stmt.value is not None else ''}"
    if isinstance(stmt, OpaqueStmt):
        reads = ", ".join(_fmt_operand(r) for r in stmt.reads)
        writes = ", ".join(f"v{vid}" for _, vid in stmt.writes)
        return f"opaque reads[{reads}] writes[{writes}]"
    if isinstance(stmt, PropRead):
        owner = stmt.cls if stmt.cls else _fmt_operand(stmt.receiver) if stmt.receiver else "?"
        return f"v{stmt.dst} := {owner}::${stmt.prop}"
    if isinstance(stmt, PropWrite):
        owner = stmt.cls if stmt.cls else _fmt_operand(stmt.receiver) if stmt.receiver else "?"
        return f"{owner}::${stmt.prop} := {_fmt_operand(stmt.src)}"
    return stmt.__class__.__name__


def dump_cfg(cfg: Cfg) -> str:
    lines = [f"function {cfg.display}"]
    for block in cfg.blocks:
        lines.append(f"Block#{block.id}(@{block.line})")
        for stmt in block.stmts:
            lines.append(f"  {format_stmt(stmt)}")
        for label, target in block.edges:
            tag = {"true": "if", "false": "else", "unconditional": ""}[label]
            suffix = f" [{tag}]" if tag else ""
            lines.append(f"  -> Block#{target}{suffix}")
    return "\n".join(lines)
