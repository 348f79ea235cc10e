"""Lowering from the parsed AST to SSA-form CFGs.

Branch conditions are flattened first so that every conditional edge tests a
single atomic expression; ``&&``, ``||`` and negations over them become nested
``if`` structure, and ``switch`` becomes an equality chain.  The lowering then
walks statements, threading a variable environment that maps names to SSA
operands, inserting phi statements at joins and loop headers.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Optional

from ..frontend.astnodes import (
    AstNode, Kind, Span,
    ROLE_ARGS, ROLE_COND, ROLE_DIM, ROLE_EXPR, ROLE_FLAG, ROLE_KEY,
    ROLE_LEFT, ROLE_NAME, ROLE_RIGHT, ROLE_STMTS, ROLE_VALUE, ROLE_VAR,
)
from ..frontend.project import SUPERGLOBALS, FunctionInfo, Project
from .ssa import (
    ArrayElemAssign, ArrayElemRead, ArrayInit, Assign, Binary, Block, CallStmt,
    CastStmt, Cfg, Const, EDGE_FALSE, EDGE_TRUE, EDGE_UNCOND, IterReset,
    IterValid, IterValue, Jump, JumpIf, OpaqueStmt, Operand, ParamRef, Phi,
    PropRead, PropWrite, ReturnStmt, Stmt, Superglobal, ThrowStmt, Unary,
    Value, YieldStmt,
)

_SHORT_CIRCUIT = {"&&", "||"}

_BRANCHING_KINDS = {
    Kind.IF, Kind.SWITCH, Kind.TERNARY, Kind.WHILE, Kind.FOR, Kind.FOREACH,
}

_EXPR_STMT_KINDS = {
    Kind.ASSIGN, Kind.CALL, Kind.METHOD_CALL, Kind.STATIC_CALL, Kind.NEW,
    Kind.BINARY_OP, Kind.UNARY_OP, Kind.CAST, Kind.TERNARY, Kind.YIELD,
    Kind.VAR, Kind.DIM, Kind.PROP_FETCH, Kind.STATIC_PROP_FETCH,
    Kind.CONST_STRING, Kind.CONST_INT, Kind.CONST_BOOL, Kind.CONST_NULL,
    Kind.NAME, Kind.ARRAY,
}


# ---- condition flattening ----------------------------------------------

def _is_composite(cond: AstNode) -> bool:
    if cond.kind == Kind.BINARY_OP and cond.attrs.get("op") in _SHORT_CIRCUIT:
        return True
    if cond.kind == Kind.UNARY_OP and cond.attrs.get("op") == "!":
        inner = cond.child(ROLE_EXPR)
        return inner is not None and _is_composite(inner)
    return False


def _negate(cond: AstNode) -> AstNode:
    node = AstNode(kind=Kind.UNARY_OP, span=cond.span, attrs={"op": "!"})
    node.children.append((ROLE_EXPR, cond))
    return node


def _push_negation(cond: AstNode) -> AstNode:
    """Distribute an outer negation over && / || (De Morgan)."""
    if cond.kind == Kind.UNARY_OP and cond.attrs.get("op") == "!":
        inner = cond.child(ROLE_EXPR)
        if inner is not None and inner.kind == Kind.BINARY_OP:
            op = inner.attrs.get("op")
            if op in _SHORT_CIRCUIT:
                flipped = "||" if op == "&&" else "&&"
                node = AstNode(kind=Kind.BINARY_OP, span=cond.span, attrs={"op": flipped})
                node.children.append((ROLE_LEFT, _push_negation(_negate(inner.child(ROLE_LEFT)))))
                node.children.append((ROLE_RIGHT, _push_negation(_negate(inner.child(ROLE_RIGHT)))))
                return node
        if inner is not None and inner.kind == Kind.UNARY_OP and inner.attrs.get("op") == "!":
            doubled = inner.child(ROLE_EXPR)
            if doubled is not None and _is_composite(doubled):
                return _push_negation(doubled)
    return cond


def _stmt_list(span: Span, stmts: list[AstNode]) -> AstNode:
    node = AstNode(kind=Kind.STMT_LIST, span=span)
    for s in stmts:
        node.children.append((None, s))
    return node


def _list_children(node: AstNode) -> list[AstNode]:
    return [child for _, child in node.children]


def _make_if(cond: AstNode, then_body: AstNode, else_body: Optional[AstNode]) -> AstNode:
    node = AstNode(kind=Kind.IF, span=cond.span)
    elem = AstNode(kind=Kind.IF_ELEM, span=cond.span)
    elem.children.append((ROLE_COND, cond))
    elem.children.append((ROLE_STMTS, then_body))
    node.children.append((None, elem))
    if else_body is not None:
        els = AstNode(kind=Kind.IF_ELEM, span=else_body.span)
        els.children.append((ROLE_STMTS, else_body))
        node.children.append((None, els))
    return node


def _build_atomic_if(cond: AstNode, then_body: AstNode,
                     else_body: Optional[AstNode]) -> AstNode:
    cond = _push_negation(cond)
    if cond.kind == Kind.BINARY_OP and cond.attrs.get("op") == "&&":
        inner = _build_atomic_if(cond.child(ROLE_RIGHT), then_body,
                                 copy.deepcopy(else_body) if else_body is not None else None)
        return _build_atomic_if(cond.child(ROLE_LEFT),
                                _stmt_list(inner.span, [inner]), else_body)
    if cond.kind == Kind.BINARY_OP and cond.attrs.get("op") == "||":
        inner = _build_atomic_if(cond.child(ROLE_RIGHT),
                                 copy.deepcopy(then_body), else_body)
        return _build_atomic_if(cond.child(ROLE_LEFT), then_body,
                                _stmt_list(inner.span, [inner]))
    return _make_if(cond, then_body, else_body)


def flatten_conditions(node: AstNode) -> AstNode:
    """Return an equivalent subtree where every branch condition is atomic.

    ``if`` with composite conditions expands to nested ifs; ``switch``
    becomes an equality chain (one arm per case, default last); all child
    statement lists are flattened recursively.
    """
    node = copy.deepcopy(node)
    return _flatten_in_place(node)


def _flatten_in_place(node: AstNode) -> AstNode:
    for i, (role, child) in enumerate(list(node.children)):
        node.children[i] = (role, _flatten_in_place(child))
    if node.kind == Kind.IF:
        return _flatten_if(node)
    if node.kind == Kind.SWITCH:
        return _flatten_switch(node)
    return node


def _flatten_if(node: AstNode) -> AstNode:
    elems = [child for _, child in node.children if child.kind == Kind.IF_ELEM]
    else_body: Optional[AstNode] = None
    if elems and elems[-1].child(ROLE_COND) is None:
        else_body = elems[-1].child(ROLE_STMTS)
        elems = elems[:-1]
    current = else_body
    for elem in reversed(elems):
        cond = elem.child(ROLE_COND)
        body = elem.child(ROLE_STMTS)
        built = _build_atomic_if(cond, body, current)
        current = _stmt_list(built.span, [built])
    assert current is not None
    inner = _list_children(current)
    if len(inner) == 1:
        return inner[0]
    return current


def _strip_trailing_break(body: AstNode) -> AstNode:
    stmts = _list_children(body)
    while stmts and stmts[-1].kind == Kind.BREAK:
        stmts = stmts[:-1]
    return _stmt_list(body.span, stmts)


def _flatten_switch(node: AstNode) -> AstNode:
    subject = node.child(ROLE_COND)
    elems = [child for _, child in node.children if child.kind == Kind.IF_ELEM]
    default_body: Optional[AstNode] = None
    arms: list[tuple[AstNode, AstNode]] = []
    for elem in elems:
        cond = elem.child(ROLE_COND)
        body = _strip_trailing_break(elem.child(ROLE_STMTS))
        if cond is None:
            default_body = body
        else:
            eq = AstNode(kind=Kind.BINARY_OP, span=cond.span, attrs={"op": "=="})
            eq.children.append((ROLE_LEFT, copy.deepcopy(subject)))
            eq.children.append((ROLE_RIGHT, cond))
            arms.append((eq, body))
    current = default_body
    for eq, body in reversed(arms):
        built = _build_atomic_if(eq, body, current)
        current = _stmt_list(built.span, [built])
    if current is None:
        return _stmt_list(node.span, [])
    inner = _list_children(current)
    if len(inner) == 1:
        return inner[0]
    return current


# ---- helpers ------------------------------------------------------------

def assigned_names(node: AstNode) -> set[str]:
    """Variable names (re)bound anywhere inside a subtree."""
    names: set[str] = set()
    for n in node.walk():
        if n.kind == Kind.ASSIGN:
            target = n.child(ROLE_VAR)
            base = _base_var(target)
            if base is not None:
                names.add(base)
        elif n.kind == Kind.FOREACH:
            for role in (ROLE_KEY, ROLE_VALUE):
                t = n.child(role)
                if t is not None and t.kind == Kind.VAR:
                    names.add(t.value)
        elif n.kind == Kind.OPAQUE_STMT:
            names.update(n.attrs.get("vars", ()))
    return names


def _base_var(target: Optional[AstNode]) -> Optional[str]:
    while target is not None and target.kind == Kind.DIM:
        target = target.child(ROLE_EXPR)
    if target is not None and target.kind == Kind.VAR:
        return target.value
    return None


def _contains_branching(node: AstNode) -> bool:
    for n in node.walk():
        if n.kind in _BRANCHING_KINDS:
            return True
        if n.kind == Kind.BINARY_OP and n.attrs.get("op") in _SHORT_CIRCUIT:
            return True
    return False


@dataclass
class _LoopCtx:
    continue_target: int
    break_envs: list[tuple[int, dict]] = field(default_factory=list)
    continue_envs: list[tuple[int, dict]] = field(default_factory=list)


class IncompleteFunction(Exception):
    """Raised when a body uses syntax the lowering cannot represent."""


# ---- the lowerer -------------------------------------------------------

class Lowerer:
    """Lowers one function body to a :class:`Cfg`."""

    def __init__(self, fn: FunctionInfo, site_base: int = 0) -> None:
        self.fn = fn
        self.cfg = Cfg(qualified=fn.qualified, display=fn.name,
                       file_id=fn.file_id, params=[])
        self.env: dict[str, Operand] = {}
        self.globals_bound: set[str] = set()
        self.loop_stack: list[_LoopCtx] = []
        self.extracts: list[tuple[Operand, object]] = []  # (array, prefix|None|False)
        self.site_base = site_base
        self.sites_used = 0
        self.cur: Optional[Block] = None

    # -- block plumbing --

    def _new_block(self, line: int) -> Block:
        block = Block(id=len(self.cfg.blocks) + 1, line=line)
        self.cfg.blocks.append(block)
        return block

    def _edge(self, src: Block, label: str, dst: Block) -> None:
        src.edges.append((label, dst.id))

    def _emit(self, stmt: Stmt) -> None:
        if self.cur is None:
            # unreachable code after return/throw/break: keep it in an
            # orphan block so its definitions still exist
            self.cur = self._new_block(stmt.span.line)
        self.cur.stmts.append(stmt)

    def _fresh(self, name: Optional[str] = None) -> int:
        self.cfg.value_count += 1
        vid = self.cfg.value_count
        if name is not None:
            self.cfg.value_names[vid] = name
        return vid

    def _next_site(self) -> int:
        sid = self.site_base + self.sites_used
        self.sites_used += 1
        return sid

    # -- entry point --

    def lower(self) -> Cfg:
        for i, p in enumerate(self.fn.params):
            self.cfg.params.append((p.name, i))
            self.env[p.name] = ParamRef(i, p.name)
        if self.fn.class_name is not None and not self.fn.is_static:
            self.env["this"] = ParamRef(-1, "this")
        body = self.fn.body
        start_line = body.span.line if body is not None else self.fn.line
        self.cur = self._new_block(start_line)
        if body is not None:
            self._stmts(body)
        if self.cur is not None:
            end_span = body.span if body is not None else self.fn.node.span
            self._emit(ReturnStmt(span=end_span, value=None))
            self.cur = None
        if not self.cfg.blocks:
            self._new_block(start_line)
        return self.cfg

    # -- statements --

    def _stmts(self, node: AstNode) -> None:
        for _, child in node.children:
            self._stmt(child)

    def _stmt(self, node: AstNode) -> None:
        kind = node.kind
        if kind == Kind.STMT_LIST:
            self._stmts(node)
        elif kind in _EXPR_STMT_KINDS:
            self._expr(node)
        elif kind == Kind.IF:
            self._if(flatten_conditions(node))
        elif kind == Kind.SWITCH:
            flat = flatten_conditions(node)
            if flat.kind == Kind.IF:
                self._if(flat)
            else:
                self._stmt(flat)
        elif kind == Kind.WHILE:
            self._while(node)
        elif kind == Kind.FOR:
            self._for(node)
        elif kind == Kind.FOREACH:
            self._foreach(node)
        elif kind == Kind.RETURN:
            expr = node.child(ROLE_EXPR)
            value = self._expr(expr) if expr is not None else None
            self._emit(ReturnStmt(span=node.span, value=value))
            self.cur = None
        elif kind == Kind.THROW:
            expr = node.child(ROLE_EXPR)
            value = self._expr(expr) if expr is not None else None
            self._emit(ThrowStmt(span=node.span, value=value))
            self.cur = None
        elif kind == Kind.BREAK:
            if self.loop_stack and self.cur is not None:
                self.loop_stack[-1].break_envs.append((self.cur.id, dict(self.env)))
            self.cur = None
        elif kind == Kind.CONTINUE:
            if self.loop_stack and self.cur is not None:
                ctx = self.loop_stack[-1]
                ctx.continue_envs.append((self.cur.id, dict(self.env)))
            self.cur = None
        elif kind == Kind.ECHO:
            for child in node.all(ROLE_EXPR):
                self._expr(child)
        elif kind == Kind.GLOBAL_STMT:
            for child in node.all(ROLE_VAR):
                name = child.value
                self.globals_bound.add(name)
                dst = self._fresh(name)
                self._emit(PropRead(span=node.span, dst=dst, prop=name,
                                    cls="<globals>"))
                self.env[name] = Value(dst)
        elif kind == Kind.OPAQUE_STMT:
            self._opaque(node)
        elif kind in (Kind.FUNC_DECL, Kind.CLASS_DECL):
            pass  # indexed separately; not part of this body's flow
        else:
            self._opaque(node)

    def _opaque(self, node: AstNode) -> None:
        names = sorted(set(node.attrs.get("vars", ())))
        reads = [self.env[n] for n in names if n in self.env]
        writes = []
        for n in names:
            vid = self._fresh(n)
            writes.append((n, vid))
            self.env[n] = Value(vid)
        self._emit(OpaqueStmt(span=node.span, reads=reads, writes=writes))

    # -- structured control flow --

    def _merge_envs(self, join: Block,
                    incoming: list[tuple[int, dict[str, Operand]]],
                    span: Span) -> None:
        """Insert phis into ``join`` for variables whose bindings differ."""
        if not incoming:
            self.env = {}
            return
        if len(incoming) == 1:
            self.env = dict(incoming[0][1])
            return
        names: list[str] = []
        seen = set()
        for _, env in incoming:
            for name in env:
                if name not in seen:
                    seen.add(name)
                    names.append(name)
        merged: dict[str, Operand] = {}
        for name in names:
            ops = []
            preds = []
            for pred_id, env in incoming:
                ops.append(env.get(name, Const(None)))
                preds.append(pred_id)
            if all(op == ops[0] for op in ops[1:]):
                merged[name] = ops[0]
                continue
            dst = self._fresh(name)
            join.stmts.insert(0, Phi(span=span, dst=dst, sources=ops, preds=preds))
            merged[name] = Value(dst)
        self.env = merged

    def _if(self, node: AstNode) -> None:
        if node.kind == Kind.STMT_LIST:
            self._stmts(node)
            return
        if node.kind != Kind.IF:
            self._stmt(node)
            return
        elems = [child for _, child in node.children if child.kind == Kind.IF_ELEM]
        cond_elem = elems[0]
        else_elem = elems[1] if len(elems) > 1 else None
        cond = cond_elem.child(ROLE_COND)
        cond_op = self._expr(cond)
        self._emit(JumpIf(span=cond.span, cond=cond_op))
        branch_point = self.cur
        assert branch_point is not None
        pre_env = dict(self.env)

        then_block = self._new_block(cond_elem.span.line)
        self._edge(branch_point, EDGE_TRUE, then_block)
        self.cur = then_block
        self.env = dict(pre_env)
        self._stmts(cond_elem.child(ROLE_STMTS))
        then_exit = self.cur
        then_env = dict(self.env)

        else_entry_line = else_elem.span.line if else_elem is not None else node.span.line
        else_block = self._new_block(else_entry_line)
        self._edge(branch_point, EDGE_FALSE, else_block)
        self.cur = else_block
        self.env = dict(pre_env)
        if else_elem is not None:
            self._stmts(else_elem.child(ROLE_STMTS))
        else_exit = self.cur
        else_env = dict(self.env)

        incoming = []
        if then_exit is not None:
            incoming.append((then_exit.id, then_env))
        if else_exit is not None:
            incoming.append((else_exit.id, else_env))
        if not incoming:
            self.cur = None
            return
        join = self._new_block(node.span.line)
        for exit_id, _ in incoming:
            block = self.cfg.block(exit_id)
            block.stmts.append(Jump(span=node.span))
            self._edge(block, EDGE_UNCOND, join)
        self.cur = join
        self._merge_envs(join, incoming, node.span)

    def _loop_header(self, span: Span, body_assigns: set[str]) -> tuple[Block, dict[str, Phi]]:
        """Start a loop header block with phis for carried variables."""
        pre_block = self.cur
        assert pre_block is not None
        pre_env = dict(self.env)
        pre_block.stmts.append(Jump(span=span))
        header = self._new_block(span.line)
        self._edge(pre_block, EDGE_UNCOND, header)
        phis: dict[str, Phi] = {}
        for name in sorted(body_assigns):
            if name not in pre_env:
                continue
            dst = self._fresh(name)
            phi = Phi(span=span, dst=dst, sources=[pre_env[name]],
                      preds=[pre_block.id])
            header.stmts.append(phi)
            phis[name] = phi
            self.env[name] = Value(dst)
        self.cur = header
        return header, phis

    def _close_loop(self, header: Block, phis: dict[str, Phi],
                    latch_envs: list[tuple[int, dict[str, Operand]]]) -> None:
        for pred_id, env in latch_envs:
            for name, phi in phis.items():
                phi.sources.append(env.get(name, Const(None)))
                phi.preds.append(pred_id)

    def _while(self, node: AstNode) -> None:
        cond = node.child(ROLE_COND)
        body = node.child(ROLE_STMTS)
        carried = assigned_names(body) | (assigned_names(cond) if cond is not None else set())
        header, phis = self._loop_header(node.span, carried)
        if cond is not None:
            cond_op = self._expr(cond)
        else:
            cond_op = Const(True)
        self._emit(JumpIf(span=node.span, cond=cond_op))
        header_exit = self.cur
        assert header_exit is not None
        header_env = dict(self.env)

        body_block = self._new_block(body.span.line)
        self._edge(header_exit, EDGE_TRUE, body_block)
        self.cur = body_block
        ctx = _LoopCtx(continue_target=header.id)
        self.loop_stack.append(ctx)
        self._stmts(body)
        self.loop_stack.pop()

        latches: list[tuple[int, dict[str, Operand]]] = []
        if self.cur is not None:
            self.cur.stmts.append(Jump(span=node.span))
            self._edge(self.cur, EDGE_UNCOND, header)
            latches.append((self.cur.id, dict(self.env)))
        for pred_id, env in ctx.continue_envs:
            block = self.cfg.block(pred_id)
            block.stmts.append(Jump(span=node.span))
            self._edge(block, EDGE_UNCOND, header)
            latches.append((pred_id, env))
        self._close_loop(header, phis, latches)

        exit_block = self._new_block(node.span.line)
        self._edge(header_exit, EDGE_FALSE, exit_block)
        incoming = [(header_exit.id, header_env)]
        for pred_id, env in ctx.break_envs:
            block = self.cfg.block(pred_id)
            block.stmts.append(Jump(span=node.span))
            self._edge(block, EDGE_UNCOND, exit_block)
            incoming.append((pred_id, env))
        self.cur = exit_block
        self._merge_envs(exit_block, incoming, node.span)

    def _for(self, node: AstNode) -> None:
        for init in node.all("init"):
            self._expr(init)
        conds = node.all(ROLE_COND)
        steps = node.all("step")
        body = node.child(ROLE_STMTS)
        carried = assigned_names(body)
        for extra in conds + steps:
            carried |= assigned_names(extra)
            for n in extra.walk():
                if n.kind == Kind.VAR:
                    carried.add(n.value)  # ++/-- desugared to assignments
        header, phis = self._loop_header(node.span, carried)
        cond_op = self._expr(conds[-1]) if conds else Const(True)
        self._emit(JumpIf(span=node.span, cond=cond_op))
        header_exit = self.cur
        assert header_exit is not None
        header_env = dict(self.env)

        body_block = self._new_block(body.span.line)
        self._edge(header_exit, EDGE_TRUE, body_block)
        step_block_line = steps[0].span.line if steps else node.span.line

        self.cur = body_block
        ctx = _LoopCtx(continue_target=-1)
        self.loop_stack.append(ctx)
        self._stmts(body)
        self.loop_stack.pop()

        step_block = self._new_block(step_block_line)
        if self.cur is not None:
            self.cur.stmts.append(Jump(span=node.span))
            self._edge(self.cur, EDGE_UNCOND, step_block)
        step_incoming = [(self.cur.id, dict(self.env))] if self.cur is not None else []
        for pred_id, env in ctx.continue_envs:
            block = self.cfg.block(pred_id)
            block.stmts.append(Jump(span=node.span))
            self._edge(block, EDGE_UNCOND, step_block)
            step_incoming.append((pred_id, env))
        self.cur = step_block if step_incoming else None
        if step_incoming:
            self._merge_envs(step_block, step_incoming, node.span)
            for step in steps:
                self._expr(step)
        latches: list[tuple[int, dict[str, Operand]]] = []
        if self.cur is not None:
            self.cur.stmts.append(Jump(span=node.span))
            self._edge(self.cur, EDGE_UNCOND, header)
            latches.append((self.cur.id, dict(self.env)))
        self._close_loop(header, phis, latches)

        exit_block = self._new_block(node.span.line)
        self._edge(header_exit, EDGE_FALSE, exit_block)
        incoming = [(header_exit.id, header_env)]
        for pred_id, env in ctx.break_envs:
            block = self.cfg.block(pred_id)
            block.stmts.append(Jump(span=node.span))
            self._edge(block, EDGE_UNCOND, exit_block)
            incoming.append((pred_id, env))
        self.cur = exit_block
        self._merge_envs(exit_block, incoming, node.span)

    def _foreach(self, node: AstNode) -> None:
        subject = node.child(ROLE_EXPR)
        body = node.child(ROLE_STMTS)
        value_var = node.child(ROLE_VALUE)
        key_var = node.child(ROLE_KEY)
        arr_op = self._expr(subject)
        self._emit(IterReset(span=node.span, arr=arr_op))

        carried = assigned_names(body)
        header, phis = self._loop_header(node.span, carried)
        valid = self._fresh()
        self._emit(IterValid(span=node.span, dst=valid, arr=arr_op))
        self._emit(JumpIf(span=node.span, cond=Value(valid)))
        header_exit = self.cur
        assert header_exit is not None
        header_env = dict(self.env)

        body_block = self._new_block(body.span.line)
        self._edge(header_exit, EDGE_TRUE, body_block)
        self.cur = body_block
        value_name = value_var.value if value_var is not None and value_var.kind == Kind.VAR else None
        key_name = key_var.value if key_var is not None and key_var.kind == Kind.VAR else None
        dst = self._fresh(value_name)
        key_dst = self._fresh(key_name) if key_name is not None else None
        self._emit(IterValue(span=node.span, dst=dst, arr=arr_op, key_dst=key_dst,
                             body_branches=_contains_branching(body)))
        if value_name is not None:
            self.env[value_name] = Value(dst)
        if key_name is not None and key_dst is not None:
            self.env[key_name] = Value(key_dst)

        ctx = _LoopCtx(continue_target=header.id)
        self.loop_stack.append(ctx)
        self._stmts(body)
        self.loop_stack.pop()

        latches: list[tuple[int, dict[str, Operand]]] = []
        if self.cur is not None:
            self.cur.stmts.append(Jump(span=node.span))
            self._edge(self.cur, EDGE_UNCOND, header)
            latches.append((self.cur.id, dict(self.env)))
        for pred_id, env in ctx.continue_envs:
            block = self.cfg.block(pred_id)
            block.stmts.append(Jump(span=node.span))
            self._edge(block, EDGE_UNCOND, header)
            latches.append((pred_id, env))
        self._close_loop(header, phis, latches)

        exit_block = self._new_block(node.span.line)
        self._edge(header_exit, EDGE_FALSE, exit_block)
        incoming = [(header_exit.id, header_env)]
        for pred_id, env in ctx.break_envs:
            block = self.cfg.block(pred_id)
            block.stmts.append(Jump(span=node.span))
            self._edge(block, EDGE_UNCOND, exit_block)
            incoming.append((pred_id, env))
        self.cur = exit_block
        self._merge_envs(exit_block, incoming, node.span)
        # loop variables stay bound after the loop with their last body value
        if value_name is not None and value_name not in self.env:
            self.env[value_name] = Value(dst)
        if key_name is not None and key_dst is not None and key_name not in self.env:
            self.env[key_name] = Value(key_dst)

    # -- expressions --

    def _expr(self, node: AstNode) -> Operand:
        kind = node.kind
        if kind == Kind.VAR:
            return self._var_read(node)
        if kind == Kind.CONST_STRING:
            return Const(node.value)
        if kind == Kind.CONST_INT:
            return Const(node.value)
        if kind == Kind.CONST_BOOL:
            return Const(node.value)
        if kind == Kind.CONST_NULL:
            return Const(None)
        if kind == Kind.NAME:
            return self._name_const(node)
        if kind == Kind.ASSIGN:
            return self._assign(node)
        if kind == Kind.BINARY_OP:
            return self._binary(node)
        if kind == Kind.UNARY_OP:
            op = node.attrs.get("op", "")
            src = self._expr(node.child(ROLE_EXPR))
            dst = self._fresh()
            self._emit(Unary(span=node.span, dst=dst, op=op, src=src))
            return Value(dst)
        if kind == Kind.CAST:
            flag = node.child(ROLE_FLAG)
            src = self._expr(node.child(ROLE_EXPR))
            dst = self._fresh()
            self._emit(CastStmt(span=node.span, dst=dst,
                                type=flag.value if flag is not None else "mixed",
                                src=src))
            return Value(dst)
        if kind == Kind.TERNARY:
            return self._ternary(node)
        if kind == Kind.ARRAY:
            return self._array_literal(node)
        if kind == Kind.DIM:
            return self._dim_read(node)
        if kind == Kind.PROP_FETCH:
            return self._prop_read(node)
        if kind == Kind.STATIC_PROP_FETCH:
            return self._static_prop_read(node)
        if kind in (Kind.CALL, Kind.METHOD_CALL, Kind.STATIC_CALL, Kind.NEW):
            return self._call(node)
        if kind == Kind.YIELD:
            expr = node.child(ROLE_EXPR)
            value = self._expr(expr) if expr is not None else None
            self._emit(YieldStmt(span=node.span, value=value))
            return Const(None)
        if kind == Kind.OPAQUE_STMT:
            self._opaque(node)
            return Const(None)
        # anything unexpected: evaluate children for effect, yield unknown
        for _, child in node.children:
            self._expr(child)
        return Const(None)

    def _var_read(self, node: AstNode) -> Operand:
        name = node.value
        if name in SUPERGLOBALS:
            return Superglobal(name)
        if name in self.env:
            return self.env[name]
        synthesized = self._extract_lookup(node.span, name)
        if synthesized is not None:
            return synthesized
        return Const(None)

    def _extract_lookup(self, span: Span, name: str) -> Optional[Operand]:
        """Bind a never-assigned variable against earlier extract() calls."""
        for arr_op, prefix in reversed(self.extracts):
            if prefix is False:   # non-constant prefix: whole array flows
                dst = self._fresh(name)
                self._emit(Assign(span=span, dst=dst, src=arr_op))
                self.env[name] = Value(dst)
                return Value(dst)
            if prefix is None:
                key = name
            else:
                tag = f"{prefix}_"
                if not name.startswith(tag):
                    continue
                key = name[len(tag):]
            dst = self._fresh(name)
            self._emit(ArrayElemRead(span=span, dst=dst, arr=arr_op,
                                     key=Const(key)))
            self.env[name] = Value(dst)
            return Value(dst)
        return None

    def _name_const(self, node: AstNode) -> Operand:
        text = node.value
        low = text.lower()
        if low == "true":
            return Const(True)
        if low == "false":
            return Const(False)
        if low == "null":
            return Const(None)
        return Const(value=text, symbol=text)

    def _binary(self, node: AstNode) -> Operand:
        op = node.attrs.get("op", "")
        left = self._expr(node.child(ROLE_LEFT))
        right = self._expr(node.child(ROLE_RIGHT))
        dst = self._fresh()
        self._emit(Binary(span=node.span, dst=dst, op=op, left=left, right=right))
        return Value(dst)

    def _ternary(self, node: AstNode) -> Operand:
        cond = node.child(ROLE_COND)
        cond_op = self._expr(cond)
        self._emit(JumpIf(span=node.span, cond=cond_op))
        branch_point = self.cur
        assert branch_point is not None
        pre_env = dict(self.env)

        then_block = self._new_block(node.span.line)
        self._edge(branch_point, EDGE_TRUE, then_block)
        self.cur = then_block
        self.env = dict(pre_env)
        left = node.child(ROLE_LEFT)
        then_op = self._expr(left) if left is not None else cond_op
        then_exit, then_env = self.cur, dict(self.env)

        else_block = self._new_block(node.span.line)
        self._edge(branch_point, EDGE_FALSE, else_block)
        self.cur = else_block
        self.env = dict(pre_env)
        else_op = self._expr(node.child(ROLE_RIGHT))
        else_exit, else_env = self.cur, dict(self.env)

        join = self._new_block(node.span.line)
        incoming = []
        if then_exit is not None:
            blk = self.cfg.block(then_exit.id)
            blk.stmts.append(Jump(span=node.span))
            self._edge(blk, EDGE_UNCOND, join)
            incoming.append((then_exit.id, then_env))
        if else_exit is not None:
            blk = self.cfg.block(else_exit.id)
            blk.stmts.append(Jump(span=node.span))
            self._edge(blk, EDGE_UNCOND, join)
            incoming.append((else_exit.id, else_env))
        self.cur = join
        self._merge_envs(join, incoming, node.span)
        if then_op == else_op:
            return then_op
        dst = self._fresh()
        join.stmts.append(Phi(span=node.span, dst=dst,
                              sources=[then_op, else_op],
                              preds=[b for b, _ in incoming][:2]))
        return Value(dst)

    def _array_literal(self, node: AstNode) -> Operand:
        elems: list[tuple[Optional[Operand], Operand]] = []
        for _, elem in node.children:
            key_node = elem.child(ROLE_KEY)
            value_node = elem.child(ROLE_VALUE)
            key_op = self._expr(key_node) if key_node is not None else None
            value_op = self._expr(value_node)
            elems.append((key_op, value_op))
        dst = self._fresh()
        self._emit(ArrayInit(span=node.span, dst=dst, elems=elems))
        return Value(dst)

    def _dim_read(self, node: AstNode) -> Operand:
        base = node.child(ROLE_EXPR)
        dim = node.child(ROLE_DIM)
        arr_op = self._expr(base)
        if dim is None:
            return Const(None)
        key_op = self._expr(dim)
        dst = self._fresh()
        self._emit(ArrayElemRead(span=node.span, dst=dst, arr=arr_op, key=key_op))
        return Value(dst)

    def _prop_read(self, node: AstNode) -> Operand:
        recv = node.child(ROLE_EXPR)
        name_node = node.child(ROLE_NAME)
        if name_node is None or name_node.kind != Kind.NAME:
            if recv is not None:
                self._expr(recv)
            return Const(None)
        prop = name_node.value
        dst = self._fresh()
        if recv is not None and recv.kind == Kind.VAR and recv.value == "this" \
                and self.fn.class_name is not None:
            self._emit(PropRead(span=node.span, dst=dst, prop=prop,
                                cls=self.fn.class_name.lower()))
        else:
            recv_op = self._expr(recv) if recv is not None else Const(None)
            self._emit(PropRead(span=node.span, dst=dst, prop=prop,
                                receiver=recv_op))
        return Value(dst)

    def _resolve_class_token(self, node: AstNode) -> Optional[str]:
        """Literal class name (lowercased) for self/static/parent/C tokens."""
        if node.kind != Kind.NAME:
            return None
        low = node.value.lower()
        if low in ("self", "static"):
            return self.fn.class_name.lower() if self.fn.class_name else None
        if low == "parent":
            return None  # resolved against the hierarchy by the call graph
        return low

    def _static_prop_read(self, node: AstNode) -> Operand:
        cls_node = node.child(ROLE_EXPR)
        name_node = node.child(ROLE_NAME)
        if name_node is None:
            return Const(None)
        prop = name_node.value
        dst = self._fresh()
        cls = self._resolve_class_token(cls_node) if cls_node is not None else None
        if cls is not None:
            self._emit(PropRead(span=node.span, dst=dst, prop=prop, cls=cls))
        elif cls_node is not None and cls_node.kind == Kind.NAME \
                and cls_node.value.lower() == "parent" and self.fn.class_name:
            self._emit(PropRead(span=node.span, dst=dst, prop=prop,
                                cls=f"parent-of:{self.fn.class_name.lower()}"))
        else:
            recv_op = self._expr(cls_node) if cls_node is not None else Const(None)
            self._emit(PropRead(span=node.span, dst=dst, prop=prop,
                                receiver=recv_op))
        return Value(dst)

    # -- assignment --

    def _assign(self, node: AstNode) -> Operand:
        target = node.child(ROLE_VAR)
        rhs = self._expr(node.child(ROLE_EXPR))
        return self._store(target, rhs, node.span)

    def _store(self, target: AstNode, rhs: Operand, span: Span) -> Operand:
        kind = target.kind
        if kind == Kind.VAR:
            name = target.value
            if name in SUPERGLOBALS:
                return rhs  # writing a superglobal: ignored, stays a source
            dst = self._fresh(name)
            self._emit(Assign(span=span, dst=dst, src=rhs))
            self.env[name] = Value(dst)
            if name in self.globals_bound:
                self._emit(PropWrite(span=span, prop=name, src=Value(dst),
                                     cls="<globals>"))
            return Value(dst)
        if kind == Kind.DIM:
            return self._store_elem(target, rhs, span)
        if kind == Kind.PROP_FETCH:
            recv = target.child(ROLE_EXPR)
            name_node = target.child(ROLE_NAME)
            if name_node is None or name_node.kind != Kind.NAME:
                return rhs
            prop = name_node.value
            if recv is not None and recv.kind == Kind.VAR and recv.value == "this" \
                    and self.fn.class_name is not None:
                self._emit(PropWrite(span=span, prop=prop, src=rhs,
                                     cls=self.fn.class_name.lower()))
            else:
                recv_op = self._expr(recv) if recv is not None else Const(None)
                self._emit(PropWrite(span=span, prop=prop, src=rhs,
                                     receiver=recv_op))
            return rhs
        if kind == Kind.STATIC_PROP_FETCH:
            cls_node = target.child(ROLE_EXPR)
            name_node = target.child(ROLE_NAME)
            if name_node is None:
                return rhs
            cls = self._resolve_class_token(cls_node) if cls_node is not None else None
            self._emit(PropWrite(span=span, prop=name_node.value, src=rhs,
                                 cls=cls))
            return rhs
        return rhs

    def _store_elem(self, target: AstNode, rhs: Operand, span: Span) -> Operand:
        # find the base variable and outermost constant key in a dim chain
        chain: list[Optional[AstNode]] = []
        node = target
        while node.kind == Kind.DIM:
            chain.append(node.child(ROLE_DIM))
            node = node.child(ROLE_EXPR)
        if node.kind in (Kind.PROP_FETCH, Kind.STATIC_PROP_FETCH):
            # $this->rows[...] = v: read the property, update the element,
            # write the array back
            base_op = self._expr(node)
            key_node = chain[-1]
            key_op = self._expr(key_node) if key_node is not None else None
            name_node = node.child(ROLE_NAME)
            pname = name_node.value if name_node is not None \
                and name_node.kind == Kind.NAME else ""
            dst = self._fresh()
            self._emit(ArrayElemAssign(span=span, arr_out=dst, arr_in=base_op,
                                       key=key_op, value=rhs, var_name=pname))
            self._store(node, Value(dst), span)
            return rhs
        if node.kind != Kind.VAR:
            # element write through any other base: evaluate and drop
            self._expr(node)
            return rhs
        name = node.value
        if name in SUPERGLOBALS:
            return rhs
        key_node = chain[-1]  # outermost subscript (nearest the base)
        key_op = self._expr(key_node) if key_node is not None else None
        arr_in = self.env.get(name, Const(None))
        dst = self._fresh(name)
        self._emit(ArrayElemAssign(span=span, arr_out=dst, arr_in=arr_in,
                                   key=key_op, value=rhs, var_name=name))
        self.env[name] = Value(dst)
        if name in self.globals_bound:
            self._emit(PropWrite(span=span, prop=name, src=Value(dst),
                                 cls="<globals>"))
        return rhs

    # -- calls --

    def _args(self, node: AstNode) -> list[Operand]:
        arg_list = node.child(ROLE_ARGS)
        if arg_list is None:
            return []
        return [self._expr(child) for _, child in arg_list.children]

    def _call(self, node: AstNode) -> Operand:
        kind = node.kind
        span = node.span
        if kind == Kind.CALL:
            callee = node.child(ROLE_EXPR)
            if callee is not None and callee.kind == Kind.NAME:
                name = callee.value
                low = name.lower().lstrip("\\")
                args_node = node
                if low == "extract":
                    return self._extract_call(node, span)
                args = self._args(args_node)
                dst = self._fresh()
                self._emit(CallStmt(span=span, dst=dst, style="func",
                                    func_name=low, func_display=name,
                                    args=args, site_id=self._next_site()))
                return Value(dst)
            callee_op = self._expr(callee) if callee is not None else Const(None)
            args = self._args(node)
            dst = self._fresh()
            self._emit(CallStmt(span=span, dst=dst, style="var_func",
                                method_ref=callee_op, args=args,
                                site_id=self._next_site()))
            return Value(dst)
        if kind == Kind.METHOD_CALL:
            recv_node = node.child(ROLE_EXPR)
            name_node = node.child(ROLE_NAME)
            recv_op = self._expr(recv_node) if recv_node is not None else Const(None)
            if name_node is not None and name_node.kind == Kind.NAME:
                method: object = name_node.value
            else:
                method = self._expr(name_node) if name_node is not None else Const(None)
            args = self._args(node)
            dst = self._fresh()
            self._emit(CallStmt(span=span, dst=dst, style="method",
                                method_ref=method, receiver=recv_op, args=args,
                                site_id=self._next_site()))
            return Value(dst)
        if kind == Kind.STATIC_CALL:
            cls_node = node.child(ROLE_EXPR)
            name_node = node.child(ROLE_NAME)
            cls: object
            if cls_node is not None and cls_node.kind == Kind.NAME:
                low = cls_node.value.lower()
                if low == "parent" and self.fn.class_name:
                    cls = f"parent-of:{self.fn.class_name.lower()}"
                else:
                    cls = self._resolve_class_token(cls_node) or low
            else:
                cls = self._expr(cls_node) if cls_node is not None else Const(None)
            if name_node is not None and name_node.kind == Kind.NAME:
                method = name_node.value
            else:
                method = self._expr(name_node) if name_node is not None else Const(None)
            args = self._args(node)
            dst = self._fresh()
            recv = self.env.get("this") if isinstance(cls, str) else None
            self._emit(CallStmt(span=span, dst=dst, style="static",
                                class_ref=cls, method_ref=method,
                                receiver=recv, args=args,
                                site_id=self._next_site()))
            return Value(dst)
        # NEW
        cls_node = node.child(ROLE_EXPR)
        if cls_node is not None and cls_node.kind == Kind.NAME:
            cls = self._resolve_class_token(cls_node) or cls_node.value.lower()
        else:
            cls = self._expr(cls_node) if cls_node is not None else Const(None)
        args = self._args(node)
        dst = self._fresh()
        self._emit(CallStmt(span=span, dst=dst, style="new", class_ref=cls,
                            args=args, site_id=self._next_site()))
        return Value(dst)

    def _extract_call(self, node: AstNode, span: Span) -> Operand:
        arg_list = node.child(ROLE_ARGS)
        children = list(arg_list.children) if arg_list is not None else []
        if not children:
            return Const(None)
        arr_op = self._expr(children[0][1])
        prefix: object = None
        if len(children) >= 3:
            prefix_node = children[2][1]
            if prefix_node.kind == Kind.CONST_STRING:
                prefix = prefix_node.value
            else:
                self._expr(prefix_node)
                prefix = False  # non-constant prefix
        if len(children) >= 2:
            self._expr(children[1][1])
        self.extracts.append((arr_op, prefix))
        dst = self._fresh()
        self._emit(CallStmt(span=span, dst=dst, style="func",
                            func_name="extract", func_display="extract",
                            args=[arr_op], site_id=self._next_site()))
        return Value(dst)


def lower_function(fn: FunctionInfo, site_base: int = 0) -> Cfg:
    return Lowerer(fn, site_base).lower()


def lower_project(project: Project) -> dict[str, Cfg]:
    """Lower every function, assigning globally unique call-site ids."""
    cfgs: dict[str, Cfg] = {}
    site_base = 0
    for fn in project.all_functions():
        lowerer = Lowerer(fn, site_base)
        cfg = lowerer.lower()
        site_base += lowerer.sites_used
        cfgs[fn.qualified] = cfg
    return cfgs
