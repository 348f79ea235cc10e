"""Branch-condition extraction for reported flows.

For every function a flow passes through, the blocks that host the flow's
statements only execute under the branch decisions that control them.  We
compute those decisions with classic control dependence (postdominators on
the function's CFG), so merge points contribute nothing — a naive walk over
predecessors would collect both arms of a re-joined ``if`` and manufacture
contradictions.

Each controlling decision becomes a :class:`PathCondition`: a recognised
string check (``strpos``, ``strstr``, ``preg_match``, membership tests), a
scalar comparison, an emptiness test, or — whenever the condition involves
state we do not model (properties, globals, unknown calls) — an opaque
marker that the checker must never prune on.  Checks implemented by
project functions that just return constant booleans are expanded in
place, with the callee's formals substituted by the caller's arguments.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Union

from ..callgraph.graph import CallGraph
from ..frontend.project import Project
from ..ir.constvals import ConstMap
from ..ir.ssa import (
    ArrayElemRead, ArrayInit, Assign, Binary, Block, CallStmt, CastStmt,
    Cfg, Const, EDGE_TRUE, IterValid, IterValue, JumpIf, Operand,
    ParamRef, Phi, PropRead, ReturnStmt, Superglobal, Unary, Value,
    YieldStmt,
)

log = logging.getLogger(__name__)

TRAVERSAL_BUDGET = 10_000
_EXPANSION_DEPTH = 3

REQUIRED_TRUE = "required-true"
REQUIRED_FALSE = "required-false"

#: builtin string checks the translator understands
CHECK_FUNCTIONS = frozenset({
    "strpos", "stripos", "strstr", "stristr",
    "preg_match", "preg_match_all",
    "in_array", "array_key_exists",
})

_COMPARISONS = frozenset({"==", "!=", "===", "!=="})


def _flip(polarity: str) -> str:
    return REQUIRED_FALSE if polarity == REQUIRED_TRUE else REQUIRED_TRUE


class TraversalBudgetExceeded(Exception):
    """Condition extraction touched too many blocks; the flow is kept."""


# ---- symbolic references ------------------------------------------------
#
# Conditions talk about values; each value reduces to one of these.  A
# TaintRef names an attacker-derived string; during checking every distinct
# TaintRef becomes its own free string variable.

@dataclass(frozen=True)
class ConstRef:
    value: object

    def __repr__(self) -> str:
        return repr(self.value)


@dataclass(frozen=True)
class ListRef:
    """A literal array: member values and (explicit) keys."""
    values: tuple = ()
    keys: tuple = ()

    def __repr__(self) -> str:
        return "[" + ", ".join(repr(v) for v in self.values) + "]"


@dataclass(frozen=True)
class FormalRef:
    fn: str
    index: int
    name: str

    def __repr__(self) -> str:
        return f"${self.name}"


@dataclass(frozen=True)
class TaintRef:
    fn: str
    name: str

    def __repr__(self) -> str:
        return f"${self.name}" if self.name else "$<input>"


@dataclass(frozen=True)
class ExternalRef:
    note: str = ""

    def __repr__(self) -> str:
        return f"<{self.note or 'external'}>"


Ref = Union[ConstRef, ListRef, FormalRef, TaintRef, ExternalRef]


# ---- condition atoms ----------------------------------------------------

@dataclass(frozen=True)
class FuncCheck:
    """A call-shaped check, optionally compared against a constant.

    ``rel`` records the comparison the branch applied to the call result,
    e.g. ``("!==", False)`` for ``strpos($u, '/') !== false``; ``None``
    means the bare truthiness of the result decided the branch.
    """
    name: str
    args: tuple[Ref, ...]
    rel: Optional[tuple[str, object]] = None
    user: bool = False      # project function we could not expand

    def __repr__(self) -> str:
        body = f"{self.name}({', '.join(repr(a) for a in self.args)})"
        if self.rel is not None:
            body += f" {self.rel[0]} {self.rel[1]!r}"
        return body


@dataclass(frozen=True)
class Compare:
    var: Ref
    op: str
    const: object

    def __repr__(self) -> str:
        return f"{self.var!r} {self.op} {self.const!r}"


@dataclass(frozen=True)
class Empty:
    var: Ref

    def __repr__(self) -> str:
        return f"empty({self.var!r})"


@dataclass(frozen=True)
class OpaqueCond:
    note: str = ""

    def __repr__(self) -> str:
        return f"opaque({self.note})" if self.note else "opaque"


Atom = Union[FuncCheck, Compare, Empty, OpaqueCond]


@dataclass(frozen=True)
class PathCondition:
    atom: Optional[Atom]
    polarity: str
    origin: tuple[str, int]                       # (file, line) of the branch
    loop_negated: bool = False
    #: non-empty when this condition is a disjunction of conjunctions
    #: (a check expanded through a callee with several matching returns)
    alternatives: tuple[tuple["PathCondition", ...], ...] = ()

    def signature(self):
        return (self.atom, self.polarity, self.alternatives)

    def describe(self) -> str:
        if self.alternatives:
            alts = " or ".join(
                "(" + " and ".join(c.describe() for c in alt) + ")"
                for alt in self.alternatives)
            return alts
        tag = self.polarity + (", loop-negated" if self.loop_negated else "")
        return f"{self.atom!r} [{tag}]"


@dataclass
class Extraction:
    """Conditions plus the context the checker needs to act on them."""
    conditions: list[PathCondition]
    bindings: dict[tuple[str, int], Ref]          # (callee, formal) -> actual
    sink_ref: Optional[Ref]
    budget_exceeded: bool = False


def extract_conditions(path, cfgs: dict[str, Cfg], callgraph: CallGraph,
                       consts: dict[str, ConstMap],
                       project: Project) -> list[PathCondition]:
    return extract(path, cfgs, callgraph, consts, project).conditions


def extract(path, cfgs: dict[str, Cfg], callgraph: CallGraph,
            consts: dict[str, ConstMap], project: Project) -> Extraction:
    worker = _Extractor(cfgs, callgraph, consts, project)
    try:
        return worker.run(path)
    except TraversalBudgetExceeded:
        log.warning("condition extraction budget exceeded for sink %s:%d",
                    path.sink.file, path.sink.line)
        return Extraction([], {}, None, budget_exceeded=True)


# ---- hop statements that anchor condition collection --------------------

_RULE_STMTS: dict[str, tuple] = {
    "call": (CallStmt,),
    "return": (ReturnStmt, YieldStmt),
    "concat": (Binary,),
    "elem-read": (ArrayElemRead,),
    "foreach": (IterValue,),
    "prop-read": (PropRead,),
    "prop-write": (),      # PropWrite is matched by line below
    "opaque": (),
    "sink": (CallStmt,),
}


class _Extractor:
    def __init__(self, cfgs, callgraph, consts, project):
        self.cfgs = cfgs
        self.callgraph = callgraph
        self.consts = consts
        self.project = project
        self._steps = 0
        self._defmaps: dict[str, dict] = {}
        self._cd: dict[str, dict[int, list[tuple[int, str]]]] = {}
        self._cyclic: dict[str, set[int]] = {}
        self._files: dict[str, str] = {}

    # -- bookkeeping ------------------------------------------------------

    def _charge(self, amount: int = 1) -> None:
        self._steps += amount
        if self._steps > TRAVERSAL_BUDGET:
            raise TraversalBudgetExceeded()

    def _defs(self, fn: str) -> dict:
        if fn not in self._defmaps:
            self._defmaps[fn] = self.cfgs[fn].def_map()
        return self._defmaps[fn]

    def _file(self, fn: str) -> str:
        if fn not in self._files:
            cfg = self.cfgs[fn]
            self._files[fn] = self.project.file_by_id(cfg.file_id).path
        return self._files[fn]

    # -- driver -----------------------------------------------------------

    def run(self, path) -> Extraction:
        units: list[tuple[str, int, str]] = []
        for hop in path.hops:
            _file, line, rule, fn = hop
            if fn in self.cfgs:
                units.append((fn, line, rule))
        if path.sink_fn in self.cfgs:
            units.append((path.sink_fn, path.sink.line, "sink"))

        bindings: dict[tuple[str, int], Ref] = {}
        for fn, line, rule in units:
            if rule == "call":
                self._record_bindings(fn, line, bindings)

        conditions: list[PathCondition] = []
        seen_sigs: set = set()
        seen_units: set = set()
        for fn, line, rule in units:
            if (fn, line) in seen_units:
                continue
            seen_units.add((fn, line))
            blocks = self._blocks_at(fn, line, rule)
            per_block = [self._conds_for_block(fn, b.id, _EXPANSION_DEPTH)
                         for b in blocks]
            for cond in self._merge_unit(per_block):
                sig = cond.signature()
                if sig not in seen_sigs:
                    seen_sigs.add(sig)
                    conditions.append(cond)

        sink_ref = self._sink_ref(path)
        resolve = _resolver(bindings)
        conditions = [_map_cond_refs(c, resolve) for c in conditions]
        if sink_ref is not None:
            sink_ref = resolve(sink_ref)
        return Extraction(_dedup(conditions), bindings, sink_ref)

    @staticmethod
    def _merge_unit(per_block: list[list[PathCondition]]
                    ) -> list[PathCondition]:
        """One flow statement can match several blocks on the same line
        (rare: duplicated by lowering).  Require agreement: keep only the
        conditions every matching block is controlled by."""
        if not per_block:
            return []
        if len(per_block) == 1:
            return per_block[0]
        common = set.intersection(
            *[{c.signature() for c in conds} for conds in per_block])
        return [c for c in per_block[0] if c.signature() in common]

    def _blocks_at(self, fn: str, line: int, rule: str) -> list[Block]:
        cfg = self.cfgs[fn]
        kinds = _RULE_STMTS.get(rule, ())
        out = []
        for block in cfg.blocks:
            for stmt in block.stmts:
                if stmt.span.line != line:
                    continue
                if kinds and not isinstance(stmt, kinds):
                    continue
                out.append(block)
                break
        return out

    # -- formal/actual bindings at call sites -----------------------------

    def _record_bindings(self, fn: str, line: int,
                         bindings: dict[tuple[str, int], Ref]) -> None:
        cfg = self.cfgs[fn]
        for block in cfg.blocks:
            for stmt in block.stmts:
                if not isinstance(stmt, CallStmt) or stmt.span.line != line:
                    continue
                for target in self.callgraph.targets(stmt.site_id):
                    callee = target.fn.qualified
                    if callee not in self.cfgs:
                        continue
                    for i, arg in enumerate(stmt.args):
                        key = (callee, i)
                        if key not in bindings:
                            bindings[key] = self._classify(fn, arg, set())

    # -- the string the sink actually receives ----------------------------

    def _sink_ref(self, path) -> Optional[Ref]:
        fn = path.sink_fn
        if fn not in self.cfgs:
            return None
        cfg = self.cfgs[fn]
        ident = path.sink.identifier.lower()
        for block in cfg.blocks:
            for stmt in block.stmts:
                if not isinstance(stmt, CallStmt) \
                        or stmt.span.line != path.sink.line:
                    continue
                label = stmt.callee_label().lower()
                if stmt.func_name != ident and ident not in label:
                    continue
                for arg in stmt.args:
                    ref = self._classify(fn, arg, set())
                    if isinstance(ref, (TaintRef, FormalRef)):
                        return ref
        return None

    # -- control dependence -----------------------------------------------

    def _control_deps(self, fn: str) -> dict[int, list[tuple[int, str]]]:
        if fn in self._cd:
            return self._cd[fn]
        cfg = self.cfgs[fn]
        ids = [b.id for b in cfg.blocks]
        self._charge(len(ids))

        # postdominator sets over the reverse graph; 0 is the virtual exit
        exit_node = 0
        succ = {b.id: [t for _, t in b.edges] for b in cfg.blocks}
        full = set(ids) | {exit_node}
        pdom = {n: set(full) for n in ids}
        pdom[exit_node] = {exit_node}
        changed = True
        while changed:
            changed = False
            self._charge(len(ids))
            for b in cfg.blocks:
                outs = succ[b.id] or [exit_node]
                new = set.intersection(*[pdom[s] for s in outs]) | {b.id}
                if new != pdom[b.id]:
                    pdom[b.id] = new
                    changed = True

        def ipdom(n: int) -> Optional[int]:
            strict = pdom[n] - {n}
            if not strict:
                return None
            # the immediate postdominator is postdominated by every other
            return max(strict, key=lambda d: (len(pdom[d]), -d))

        cd: dict[int, set[tuple[int, str]]] = {b.id: set() for b in cfg.blocks}
        for block in cfg.blocks:
            if len(block.edges) < 2:
                continue
            stop = ipdom(block.id)
            for label, target in block.edges:
                walker: Optional[int] = target
                visited: set[int] = set()
                while walker is not None and walker != stop \
                        and walker != exit_node and walker not in visited:
                    visited.add(walker)
                    self._charge()
                    cd[walker].add((block.id, label))
                    walker = ipdom(walker)
        self._cd[fn] = {bid: sorted(deps) for bid, deps in cd.items()}
        return self._cd[fn]

    def _cycle_blocks(self, fn: str) -> set[int]:
        if fn in self._cyclic:
            return self._cyclic[fn]
        cfg = self.cfgs[fn]
        succ = {b.id: [t for _, t in b.edges] for b in cfg.blocks}
        cyclic: set[int] = set()
        for start in succ:
            stack = list(succ[start])
            seen: set[int] = set()
            while stack:
                self._charge()
                node = stack.pop()
                if node == start:
                    cyclic.add(start)
                    break
                if node in seen:
                    continue
                seen.add(node)
                stack.extend(succ.get(node, ()))
        self._cyclic[fn] = cyclic
        return cyclic

    def _conds_for_block(self, fn: str, block_id: int,
                         depth: int) -> list[PathCondition]:
        cd = self._control_deps(fn)
        out: list[PathCondition] = []
        seen_edges: set[tuple[int, str]] = set()
        work = [block_id]
        while work:
            self._charge()
            current = work.pop(0)
            for branch_id, label in cd.get(current, ()):  # sorted
                if (branch_id, label) in seen_edges:
                    continue
                seen_edges.add((branch_id, label))
                out.extend(self._branch_atoms(fn, branch_id, label, depth))
                work.append(branch_id)
        return _dedup(out)

    # -- turning a branch decision into atoms ------------------------------

    def _branch_atoms(self, fn: str, branch_id: int, label: str,
                      depth: int) -> list[PathCondition]:
        cfg = self.cfgs[fn]
        block = cfg.block(branch_id)
        if not block.stmts or not isinstance(block.stmts[-1], JumpIf):
            return []
        jump = block.stmts[-1]
        polarity = REQUIRED_TRUE if label == EDGE_TRUE else REQUIRED_FALSE
        origin = (self._file(fn), jump.span.line)
        looped = branch_id in self._cycle_blocks(fn)
        conds = self._build_atoms(fn, jump.cond, polarity, origin, depth)
        if looped:
            conds = [replace(c, loop_negated=True) for c in conds]
        return conds

    def _build_atoms(self, fn: str, op: Operand, polarity: str,
                     origin: tuple[str, int], depth: int,
                     rel: Optional[tuple[str, object]] = None,
                     seen: Optional[set] = None) -> list[PathCondition]:
        self._charge()
        seen = seen or set()
        made = lambda atom: [PathCondition(atom, polarity, origin)]

        if isinstance(op, Const):
            return []           # constant branch decides nothing stringy
        if isinstance(op, (Superglobal, ParamRef)):
            # bare truthiness of an input: "if ($x)" means not-empty-ish
            ref = self._classify(fn, op, seen)
            return [PathCondition(Empty(ref), _flip(polarity), origin)]
        if not isinstance(op, Value) or op.id in seen:
            return made(OpaqueCond())
        seen = seen | {op.id}
        stmt = self._defs(fn).get(op.id)
        if stmt is None:
            return made(OpaqueCond())

        if isinstance(stmt, IterValid):
            return []           # loop exhaustion, not a data condition
        if isinstance(stmt, Assign):
            return self._build_atoms(fn, stmt.src, polarity, origin, depth,
                                     rel, seen)
        if isinstance(stmt, Unary) and stmt.op == "!":
            return self._build_atoms(fn, stmt.src, _flip(polarity), origin,
                                     depth, rel, seen)
        if isinstance(stmt, Binary) and stmt.op in _COMPARISONS \
                and rel is None:
            return self._compare_atoms(fn, stmt, polarity, origin, depth,
                                       seen)
        if isinstance(stmt, CallStmt):
            return self._call_atoms(fn, stmt, polarity, origin, depth, rel,
                                    seen)
        if isinstance(stmt, (ArrayElemRead, PropRead, CastStmt, IterValue)):
            ref = self._classify_value(fn, op.id, seen)
            if isinstance(ref, (TaintRef, FormalRef)):
                return [PathCondition(Empty(ref), _flip(polarity), origin)]
            return made(OpaqueCond())
        if isinstance(stmt, Phi):
            return made(OpaqueCond("merged"))
        return made(OpaqueCond())

    def _compare_atoms(self, fn: str, stmt: Binary, polarity: str,
                       origin: tuple[str, int], depth: int,
                       seen: set) -> list[PathCondition]:
        consts = self.consts[fn]
        left_known = consts.operand_known(stmt.left)
        right_known = consts.operand_known(stmt.right)
        if left_known and right_known:
            return []           # folds to a constant branch
        if not left_known and not right_known:
            return [PathCondition(OpaqueCond("var-vs-var"), polarity, origin)]
        if right_known:
            other, const = stmt.left, consts.of_operand(stmt.right)
        else:
            other, const = stmt.right, consts.of_operand(stmt.left)

        call = self._resolve_call(fn, other, set(seen))
        if call is not None:
            return self._call_atoms(fn, call, polarity, origin, depth,
                                    (stmt.op, const), seen)
        ref = self._classify(fn, other, seen)
        if isinstance(ref, ExternalRef):
            return [PathCondition(OpaqueCond(ref.note or "external"),
                                  polarity, origin)]
        return [PathCondition(Compare(ref, stmt.op, const), polarity, origin)]

    def _resolve_call(self, fn: str, op: Operand,
                      seen: set) -> Optional[CallStmt]:
        while isinstance(op, Value) and op.id not in seen:
            seen.add(op.id)
            self._charge()
            stmt = self._defs(fn).get(op.id)
            if isinstance(stmt, CallStmt):
                return stmt
            if isinstance(stmt, Assign):
                op = stmt.src
                continue
            return None
        return None

    def _call_atoms(self, fn: str, stmt: CallStmt, polarity: str,
                    origin: tuple[str, int], depth: int,
                    rel: Optional[tuple[str, object]],
                    seen: set) -> list[PathCondition]:
        name = stmt.func_name if stmt.style in ("func", "var_func") else None

        if name == "empty":
            folded = _fold_bool_rel(polarity, rel)
            if folded is None or not stmt.args:
                return [PathCondition(OpaqueCond("empty"), polarity, origin)]
            ref = self._classify(fn, stmt.args[0], seen)
            if isinstance(ref, ExternalRef):
                return [PathCondition(OpaqueCond("empty-of-external"),
                                      folded, origin)]
            return [PathCondition(Empty(ref), folded, origin)]
        if name == "isset":
            return [PathCondition(OpaqueCond("isset"), polarity, origin)]

        if name in CHECK_FUNCTIONS:
            arg_choices = [self._classify_arg(fn, a, seen) for a in stmt.args]
            combos = list(itertools.islice(
                itertools.product(*arg_choices), 8)) if arg_choices else [()]
            return [PathCondition(FuncCheck(name, tuple(combo), rel),
                                  polarity, origin)
                    for combo in combos]

        targets = [t for t in self.callgraph.targets(stmt.site_id)
                   if t.fn.qualified in self.cfgs]
        if len(targets) == 1:
            expanded = self._expand_user(fn, stmt, targets[0].fn.qualified,
                                         polarity, origin, depth, rel)
            if expanded is not None:
                return expanded
            args = tuple(self._classify(fn, a, seen) for a in stmt.args)
            return [PathCondition(
                FuncCheck(targets[0].fn.qualified, args, rel, user=True),
                polarity, origin)]
        return [PathCondition(OpaqueCond(stmt.callee_label()), polarity,
                              origin)]

    def _expand_user(self, caller: str, stmt: CallStmt, callee: str,
                     polarity: str, origin: tuple[str, int], depth: int,
                     rel: Optional[tuple[str, object]]
                     ) -> Optional[list[PathCondition]]:
        if depth <= 0:
            return None
        need = _fold_bool_rel(polarity, rel)
        if need is None:
            return None
        want_truthy = need == REQUIRED_TRUE

        cfg = self.cfgs[callee]
        consts = self.consts[callee]
        anchors = []
        for block in cfg.blocks:
            for ret in block.stmts:
                if not isinstance(ret, ReturnStmt) or ret.value is None:
                    continue
                if not consts.operand_known(ret.value):
                    return None         # computed return; cannot expand
                if bool(consts.of_operand(ret.value)) == want_truthy:
                    anchors.append(block.id)
        if not anchors:
            return None

        subst: dict[Ref, Ref] = {}
        for i, arg in enumerate(stmt.args):
            for pname, pidx in cfg.params:
                if pidx == i:
                    subst[FormalRef(callee, pidx, pname)] = \
                        self._classify(caller, arg, set())

        def rewrite(cond: PathCondition) -> PathCondition:
            return _map_cond_refs(cond, lambda r: subst.get(r, r))

        alternatives = []
        for block_id in sorted(anchors):
            conds = [rewrite(c)
                     for c in self._conds_for_block(callee, block_id,
                                                    depth - 1)]
            alternatives.append(tuple(conds))
        if len(alternatives) == 1:
            return list(alternatives[0])
        return [PathCondition(None, REQUIRED_TRUE, origin,
                              alternatives=tuple(alternatives))]

    # -- operand classification -------------------------------------------

    def _classify_arg(self, fn: str, op: Operand, seen: set) -> list[Ref]:
        """Like _classify, but a loop variable over a literal array expands
        to every member: the loop body runs once per member, so a check in
        it must hold for each."""
        if isinstance(op, Value):
            stmt = self._defs(fn).get(op.id)
            if isinstance(stmt, IterValue):
                ref = self._classify(fn, stmt.arr, set(seen))
                if isinstance(ref, ListRef) and ref.values:
                    return [ConstRef(v) for v in ref.values]
        return [self._classify(fn, op, seen)]

    def _classify(self, fn: str, op: Operand, seen: set) -> Ref:
        self._charge()
        if isinstance(op, Const):
            if op.symbol is not None:
                return ExternalRef(f"constant {op.symbol}")
            return ConstRef(op.value)
        if isinstance(op, Superglobal):
            return TaintRef(fn, op.name)
        if isinstance(op, ParamRef):
            return FormalRef(fn, op.index, op.name)
        if isinstance(op, Value):
            return self._classify_value(fn, op.id, seen)
        return ExternalRef()

    def _classify_value(self, fn: str, vid: int, seen: set) -> Ref:
        if vid in seen:
            return ExternalRef("cyclic")
        seen = seen | {vid}
        self._charge()
        cfg = self.cfgs[fn]
        consts = self.consts[fn]
        if consts.known(vid):
            value = consts.get(vid)
            if isinstance(value, tuple):
                # constant folding stores literal arrays as (key, value)
                # pairs with None for positional entries
                return ListRef(
                    tuple(v for _, v in value),
                    tuple(k for k, _ in value if k is not None))
            return ConstRef(value)
        stmt = self._defs(fn).get(vid)
        if stmt is None:
            return ExternalRef()
        if isinstance(stmt, Assign):
            return self._classify(fn, stmt.src, seen)
        if isinstance(stmt, CastStmt) and stmt.type in ("string", "binary"):
            return self._classify(fn, stmt.src, seen)
        if isinstance(stmt, ArrayInit):
            values, keys = [], []
            for key_op, val_op in stmt.elems:
                if not consts.operand_known(val_op):
                    return ExternalRef("array")
                values.append(consts.of_operand(val_op))
                if key_op is not None and consts.operand_known(key_op):
                    keys.append(consts.of_operand(key_op))
            return ListRef(tuple(values), tuple(keys))
        if isinstance(stmt, ArrayElemRead):
            base = self._classify(fn, stmt.arr, seen)
            if isinstance(base, (TaintRef,)) or isinstance(stmt.arr,
                                                           Superglobal):
                name = cfg.value_names.get(vid) or f"{base!r}-elem"
                return TaintRef(fn, name.lstrip("$"))
            if isinstance(base, FormalRef):
                name = cfg.value_names.get(vid)
                if name:
                    return TaintRef(fn, name.lstrip("$"))
            return ExternalRef("array-element")
        if isinstance(stmt, IterValue):
            base = self._classify(fn, stmt.arr, seen)
            if isinstance(base, TaintRef):
                name = cfg.value_names.get(vid, base.name + "-item")
                return TaintRef(fn, name.lstrip("$"))
            return ExternalRef("loop-value")
        if isinstance(stmt, PropRead):
            return ExternalRef(f"property {stmt.prop}")
        if isinstance(stmt, CallStmt):
            return ExternalRef(f"call {stmt.callee_label()}")
        if isinstance(stmt, Phi):
            refs = {self._classify(fn, s, seen) for s in stmt.sources
                    if s is not None}
            if len(refs) == 1:
                return refs.pop()
            return ExternalRef("merged")
        return ExternalRef(type(stmt).__name__.lower())


# ---- helpers ------------------------------------------------------------

def _fold_bool_rel(polarity: str,
                   rel: Optional[tuple[str, object]]) -> Optional[str]:
    """Fold a comparison-against-boolean into a polarity, if possible."""
    if rel is None:
        return polarity
    op, const = rel
    if not isinstance(const, bool):
        return None
    flip = (const is False) == (op in ("==", "==="))
    return _flip(polarity) if flip else polarity


def _dedup(conds: list[PathCondition]) -> list[PathCondition]:
    seen, out = set(), []
    for cond in conds:
        sig = cond.signature()
        if sig not in seen:
            seen.add(sig)
            out.append(cond)
    return out


def _map_ref_in_atom(atom: Optional[Atom],
                     fun: Callable[[Ref], Ref]) -> Optional[Atom]:
    if isinstance(atom, FuncCheck):
        return FuncCheck(atom.name, tuple(fun(a) for a in atom.args),
                         atom.rel, atom.user)
    if isinstance(atom, Compare):
        return Compare(fun(atom.var), atom.op, atom.const)
    if isinstance(atom, Empty):
        return Empty(fun(atom.var))
    return atom


def _map_cond_refs(cond: PathCondition,
                   fun: Callable[[Ref], Ref]) -> PathCondition:
    alts = tuple(tuple(_map_cond_refs(c, fun) for c in alt)
                 for alt in cond.alternatives)
    return PathCondition(_map_ref_in_atom(cond.atom, fun), cond.polarity,
                         cond.origin, cond.loop_negated, alts)


def _resolver(bindings: dict[tuple[str, int], Ref]) -> Callable[[Ref], Ref]:
    def resolve(ref: Ref) -> Ref:
        hops = 0
        while isinstance(ref, FormalRef) and hops < 10:
            bound = bindings.get((ref.fn, ref.index))
            if bound is None or bound == ref:
                break
            ref = bound
            hops += 1
        return ref
    return resolve
