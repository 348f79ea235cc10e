"""Interprocedural taint propagation.

Every defined function is analysed as a root with clean formals; call
edges additionally propagate taint into callees through per-call-site
entry states.  Function behaviour is memoised as a summary keyed on
(function, entry taint): the return taint, the sink events observed, and
the property writes performed — all with provenance chains that stay
relative to the callee's formals so one summary serves every call site.
A global worklist recomputes summaries until they stabilise, which copes
with recursion and mutual recursion without special cases.

Object properties and ``global`` variables live in a flow-insensitive
symbol map keyed by (declaring class, name).  Reads see a frozen snapshot
while writes are collected; when a pass changes the map, all summaries
are discarded and the analysis reruns against the new snapshot until the
map reaches a fixed point.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Union

from ..callgraph.graph import CallGraph
from ..callgraph.typeinfo import TypeTable
from ..frontend.project import Project
from ..ir.constvals import ConstMap
from ..ir.ssa import (
    ArrayElemAssign, ArrayElemRead, ArrayInit, Assign, Binary, CallStmt,
    CastStmt, Cfg, Const, IterValid, IterValue, OpaqueStmt, Operand,
    ParamRef, Phi, PropRead, PropWrite, ReturnStmt, Superglobal, Unary,
    Value, YieldStmt,
)
from ..registry.specs import (
    ACCEPTS_BOTH, ACCEPTS_FILE, ACCEPTS_REQUEST, Registry,
)
from .lattice import (
    CLEAN, ParamRoot, Prov, SAFE, SourceRoot, SymKey, TAU, VarTaint,
    chain_hops, extend, join_taint, join_taints, root_of, scalar_triplet,
    splice,
)
from . import transfer

log = logging.getLogger(__name__)

KIND_FILE = "file_url"
KIND_REQUEST = "request_url"


class FixpointBudgetExceeded(Exception):
    def __init__(self, qualified: str, partial: "Summary") -> None:
        super().__init__(f"fixpoint budget exceeded in {qualified}")
        self.qualified = qualified
        self.partial = partial


@dataclass(frozen=True)
class SinkEvent:
    sink_id: str
    kind: str                   # KIND_FILE or KIND_REQUEST
    file: str
    line: int
    chain: Optional[Prov]
    fn: str = ""                # function containing the sink call
    provenance: str = "builtin"  # which registry layer declared the sink

    def site_key(self):
        return (self.sink_id, self.kind, self.file, self.line)


@dataclass
class Summary:
    ret: VarTaint = CLEAN
    events: tuple[SinkEvent, ...] = ()
    prop_writes: tuple[tuple[tuple[str, str], VarTaint], ...] = ()

    def state_key(self):
        """Comparable shape with provenance chains left out."""
        return (
            self.ret.tf, self.ret.tr,
            frozenset(e.site_key() for e in self.events),
            frozenset((k, vt.tf, vt.tr) for k, vt in self.prop_writes),
        )


_BOTTOM_KEY = Summary().state_key()


@dataclass(frozen=True)
class PathPoint:
    identifier: str
    file: str
    line: int


@dataclass(frozen=True)
class TaintPath:
    source: PathPoint
    sink: PathPoint
    hops: tuple[tuple[str, int, str, str], ...]   # (file, line, rule, fn)
    taint_kind: str             # file_url | request_url | both
    sink_fn: str = ""           # function containing the sink call
    provenance: str = "builtin"  # registry layer that declared the sink


@dataclass
class TaintResult:
    paths: list[TaintPath]
    incomplete: list[str]
    value_envs: dict[str, dict[int, VarTaint]] = field(default_factory=dict)


def _strip(vt: VarTaint) -> VarTaint:
    return VarTaint(vt.tf, vt.tr)


def _const_key(val: object) -> Optional[Union[str, int]]:
    if isinstance(val, bool):
        return int(val)
    if isinstance(val, int):
        return val
    if isinstance(val, float):
        return int(val)
    if isinstance(val, str):
        return val
    if val is None:
        return ""
    return None


class _FunctionState:
    """Mutable collectors for one summary computation."""

    def __init__(self) -> None:
        self.env: dict[int, VarTaint] = {}
        self.ret = CLEAN
        self.events: dict[tuple, SinkEvent] = {}
        self.prop_writes: dict[tuple[str, str], VarTaint] = {}
        self.changed = False

    def set(self, vid: int, vt: VarTaint) -> None:
        old = self.env.get(vid)
        if old != vt:
            self.changed = True
        self.env[vid] = vt

    def summary(self) -> Summary:
        return Summary(self.ret, tuple(self.events.values()),
                       tuple(sorted(self.prop_writes.items())))


class TaintEngine:
    def __init__(self, project: Project, cfgs: dict[str, Cfg],
                 callgraph: CallGraph, registry: Registry,
                 types: TypeTable, consts: dict[str, ConstMap],
                 safety_strings: bool = True,
                 fixpoint_budget: int = 64) -> None:
        self.project = project
        self.cfgs = cfgs
        self.callgraph = callgraph
        self.registry = registry
        self.types = types
        self.consts = consts
        self.safety_strings = safety_strings
        self.fixpoint_budget = fixpoint_budget

        self.prop_map: dict[tuple[str, str], VarTaint] = {}
        self.table: dict[tuple, Summary] = {}
        self.entries: dict[tuple, dict[int, VarTaint]] = {}
        self.deps: dict[tuple, set] = {}
        self.incomplete: set[str] = set()
        self.value_envs: dict[str, dict[int, VarTaint]] = {}
        self._current_key: Optional[tuple] = None
        self._discovered: set = set()
        self._aliases: dict[str, dict[int, frozenset[str]]] = {}

    # -- public -----------------------------------------------------------

    def run(self) -> TaintResult:
        events: list[SinkEvent] = []
        for round_no in range(12):
            events = self._run_phase()
            collected = self._collect_props()
            if self._props_equal(collected, self.prop_map):
                break
            self.prop_map = collected
            log.debug("property map changed; rerunning (round %d)",
                      round_no + 1)
        paths = self._assemble_paths(events)
        return TaintResult(paths, sorted(self.incomplete), self.value_envs)

    # -- worklist over summaries -----------------------------------------

    def _run_phase(self) -> list[SinkEvent]:
        self.table.clear()
        self.entries.clear()
        self.deps.clear()
        self.incomplete.clear()
        self.value_envs.clear()
        self._discovered.clear()

        roots = [self._touch(q, {}) for q in sorted(self.cfgs)]
        dirty = set(roots)
        rounds = 0
        limit = max(4000, 80 * len(self.cfgs))
        while dirty:
            rounds += 1
            if rounds > limit:
                for q, _ in dirty:
                    self.incomplete.add(q)
                log.warning("summary worklist did not stabilise; "
                            "%d states left", len(dirty))
                break
            key = min(dirty)
            dirty.discard(key)
            old = self.table[key]
            try:
                new = self._run_function(key)
            except FixpointBudgetExceeded as exc:
                self.incomplete.add(exc.qualified)
                new = exc.partial
            self.table[key] = new
            dirty |= self._discovered
            self._discovered.clear()
            if new.state_key() != old.state_key():
                dirty |= self.deps.get(key, set())
        return [e for key in roots for e in self.table[key].events]

    def _touch(self, qualified: str, entry: dict[int, VarTaint]) -> tuple:
        entry_key = tuple(sorted(
            (idx, repr(vt.tf), repr(vt.tr)) for idx, vt in entry.items()
            if not vt.clean))
        key = (qualified, entry_key)
        if key not in self.table:
            self.table[key] = Summary()
            self.entries[key] = {i: _strip(vt) for i, vt in entry.items()}
            self._discovered.add(key)
        return key

    def _summary_for(self, qualified: str,
                     entry: dict[int, VarTaint]) -> Summary:
        key = self._touch(qualified, entry)
        if self._current_key is not None:
            # self-dependencies included: a recursive function whose
            # summary grew must be re-run against its own new value
            self.deps.setdefault(key, set()).add(self._current_key)
        return self.table[key]

    def _run_function(self, key: tuple) -> Summary:
        qualified, entry_key = key
        cfg = self.cfgs[qualified]
        entry = self.entries[key]
        outer = self._current_key
        self._current_key = key
        try:
            state = _FunctionState()
            prev = None
            passes = 0
            while True:
                passes += 1
                state.changed = False
                state.ret = CLEAN
                state.events = {}
                state.prop_writes = {}
                for block in cfg.blocks:
                    for stmt in block.stmts:
                        self._transfer(stmt, state, cfg, entry)
                snapshot = state.summary().state_key()
                if not state.changed and snapshot == prev:
                    break
                prev = snapshot
                if passes >= self.fixpoint_budget:
                    raise FixpointBudgetExceeded(qualified, state.summary())
            merged = self.value_envs.setdefault(qualified, {})
            for vid, vt in state.env.items():
                cur = merged.get(vid)
                merged[vid] = vt if cur is None else join_taint(cur, vt)
            return state.summary()
        finally:
            self._current_key = outer

    # -- operand taint ----------------------------------------------------

    def _file_of(self, span) -> str:
        return self.project.file_by_id(span.file_id).path

    def _taint_of(self, op: Operand, state: _FunctionState,
                  entry: dict[int, VarTaint], span) -> VarTaint:
        if isinstance(op, Const):
            return CLEAN
        if isinstance(op, Superglobal):
            root = SourceRoot(f"${op.name}", self._file_of(span), span.line)
            return VarTaint(scalar_triplet(TAU), scalar_triplet(TAU),
                            root, root)
        if isinstance(op, ParamRef):
            vt = entry.get(op.index, CLEAN)
            if vt.clean:
                return CLEAN
            root = ParamRoot(op.index)
            return VarTaint(
                vt.tf, vt.tr,
                root if vt.tf != SAFE else None,
                root if vt.tr != SAFE else None,
            )
        if isinstance(op, Value):
            return state.env.get(op.id, CLEAN)
        return CLEAN

    # -- alias names for symbolic keys -----------------------------------

    def _alias_map(self, cfg: Cfg) -> dict[int, frozenset[str]]:
        cached = self._aliases.get(cfg.qualified)
        if cached is not None:
            return cached
        parent: dict[int, int] = {}

        def find(x: int) -> int:
            while parent.setdefault(x, x) != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        def union(a: int, b: int) -> None:
            parent[find(a)] = find(b)

        extra: dict[int, set[str]] = {}
        for block in cfg.blocks:
            for stmt in block.stmts:
                if isinstance(stmt, Assign):
                    if isinstance(stmt.src, Value):
                        union(stmt.dst, stmt.src.id)
                    elif isinstance(stmt.src, ParamRef):
                        extra.setdefault(stmt.dst, set()).add(stmt.src.name)
        groups: dict[int, set[str]] = {}
        for vid, name in cfg.value_names.items():
            groups.setdefault(find(vid), set()).add(name)
        for vid, names in extra.items():
            groups.setdefault(find(vid), set()).update(names)
        result = {}
        for vid in set(parent) | set(cfg.value_names):
            result[vid] = frozenset(groups.get(find(vid), set()))
        self._aliases[cfg.qualified] = result
        return result

    def _key_of(self, op: Optional[Operand], cfg: Cfg,
                consts: ConstMap) -> tuple[object, frozenset[str]]:
        """Resolve an array subscript to a constant key or a symbolic one."""
        if op is None:
            return None, frozenset()
        val = consts.of_operand(op)
        ck = _const_key(val) if consts.operand_known(op) else None
        if ck is not None:
            return ck, frozenset()
        if isinstance(op, ParamRef):
            kind = "mixed"
            return SymKey(op.name, kind), frozenset({op.name})
        if isinstance(op, Value):
            aliases = self._alias_map(cfg).get(op.id, frozenset())
            name = cfg.value_names.get(op.id) or (min(aliases) if aliases else f"v{op.id}")
            info = self.types.operand_type(cfg.qualified, op)
            kind = info.scalar if info.scalar else "mixed"
            return SymKey(name, kind), aliases
        return SymKey(repr(op), "mixed"), frozenset()

    # -- statement transfer ----------------------------------------------

    def _transfer(self, stmt, state: _FunctionState, cfg: Cfg,
                  entry: dict[int, VarTaint]) -> None:
        consts = self.consts[cfg.qualified]
        span = stmt.span
        if isinstance(stmt, Assign):
            state.set(stmt.dst,
                      self._taint_of(stmt.src, state, entry, span))
        elif isinstance(stmt, Unary):
            state.set(stmt.dst, transfer.unary_taint(
                self._taint_of(stmt.src, state, entry, span)))
        elif isinstance(stmt, Binary):
            left = self._taint_of(stmt.left, state, entry, span)
            right = self._taint_of(stmt.right, state, entry, span)
            vt = transfer.binary_taint(
                stmt.op, left, right,
                consts.string_of(stmt.left), consts.string_of(stmt.right),
                consts.string_prefix_of(stmt.left),
                safety_strings=self.safety_strings)
            if stmt.op == "." and not vt.clean:
                vt = VarTaint(
                    vt.tf, vt.tr,
                    extend(vt.prov_f, self._file_of(span), span.line,
                           "concat", cfg.qualified),
                    extend(vt.prov_r, self._file_of(span), span.line,
                           "concat", cfg.qualified))
            state.set(stmt.dst, vt)
        elif isinstance(stmt, CastStmt):
            state.set(stmt.dst, transfer.cast_taint(
                stmt.type,
                self._taint_of(stmt.src, state, entry, span)))
        elif isinstance(stmt, ArrayInit):
            entries = []
            for key_op, val_op in stmt.elems:
                key, _ = self._key_of(key_op, cfg, consts)
                entries.append(
                    (key, self._taint_of(val_op, state, entry, span)))
            name = cfg.value_names.get(stmt.dst, "")
            state.set(stmt.dst, transfer.array_literal_taint(entries, name))
        elif isinstance(stmt, ArrayElemAssign):
            base = self._taint_of(stmt.arr_in, state, entry, span)
            value = self._taint_of(stmt.value, state, entry, span)
            key, _ = self._key_of(stmt.key, cfg, consts)
            vt = transfer.elem_assign_taint(base, key, value, stmt.var_name)
            state.set(stmt.arr_out, vt)
        elif isinstance(stmt, ArrayElemRead):
            base = self._taint_of(stmt.arr, state, entry, span)
            key, aliases = self._key_of(stmt.key, cfg, consts)
            vt = transfer.elem_read_taint(base, key, aliases)
            if not vt.clean:
                vt = VarTaint(
                    vt.tf, vt.tr,
                    extend(vt.prov_f, self._file_of(span), span.line,
                           "elem-read", cfg.qualified),
                    extend(vt.prov_r, self._file_of(span), span.line,
                           "elem-read", cfg.qualified))
            state.set(stmt.dst, vt)
        elif isinstance(stmt, Phi):
            state.set(stmt.dst, join_taints([
                self._taint_of(s, state, entry, span) for s in stmt.sources]))
        elif isinstance(stmt, IterValid):
            state.set(stmt.dst, CLEAN)
        elif isinstance(stmt, IterValue):
            arr = self._taint_of(stmt.arr, state, entry, span)
            vt = transfer.foreach_value_taint(arr, stmt.body_branches)
            if not vt.clean:
                vt = VarTaint(
                    vt.tf, vt.tr,
                    extend(vt.prov_f, self._file_of(span), span.line,
                           "foreach", cfg.qualified),
                    extend(vt.prov_r, self._file_of(span), span.line,
                           "foreach", cfg.qualified))
            state.set(stmt.dst, vt)
            if stmt.key_dst is not None:
                state.set(stmt.key_dst, CLEAN)
        elif isinstance(stmt, (ReturnStmt, YieldStmt)):
            if stmt.value is not None:
                vt = self._taint_of(stmt.value, state, entry, span)
                if not vt.clean:
                    vt = VarTaint(
                        vt.tf, vt.tr,
                        extend(vt.prov_f, self._file_of(span), span.line,
                               "return", cfg.qualified),
                        extend(vt.prov_r, self._file_of(span), span.line,
                               "return", cfg.qualified))
                    state.ret = join_taint(state.ret, vt)
        elif isinstance(stmt, OpaqueStmt):
            flowed = join_taints([
                self._taint_of(r, state, entry, span) for r in stmt.reads])
            for _, vid in stmt.writes:
                state.set(vid, flowed)
        elif isinstance(stmt, PropRead):
            state.set(stmt.dst, self._prop_read(stmt, state, entry, span, cfg))
        elif isinstance(stmt, PropWrite):
            self._prop_write(stmt, state, entry, span, cfg)
        elif isinstance(stmt, CallStmt):
            self._call(stmt, state, cfg, entry)
        # jumps, throws, and iterator resets carry no data

    # -- properties and globals ------------------------------------------

    def _prop_key_candidates(self, cls: Optional[object],
                             receiver: Optional[Operand], prop: str,
                             cfg: Cfg) -> list[str]:
        if isinstance(cls, str):
            if cls.startswith("parent-of:"):
                owner = self.project.classes.get(cls.split(":", 1)[1])
                resolved = owner.parent if owner and owner.parent else None
                return [resolved] if resolved else []
            return [cls]
        if receiver is not None:
            info = self.types.operand_type(cfg.qualified, receiver)
            if info.candidates:
                # untyped writes may have landed in the catch-all bucket
                return sorted(info.candidates) + ["<any>"]
        # unknown receiver: every class that declares the property
        return sorted({key[0] for key in self.prop_map
                       if key[1] == prop and key[0] != "<globals>"})

    def _declaring_class(self, cls_key: str, prop: str) -> str:
        if cls_key == "<globals>":
            return cls_key
        for info in self.project.ancestry(cls_key):
            if prop in info.props:
                return info.name.lower()
        return cls_key

    def _prop_read(self, stmt: PropRead, state: _FunctionState,
                   entry: dict[int, VarTaint], span, cfg: Cfg) -> VarTaint:
        taints = []
        for cand in self._prop_key_candidates(stmt.cls, stmt.receiver,
                                              stmt.prop, cfg):
            key = (self._declaring_class(cand, stmt.prop), stmt.prop)
            vt = self.prop_map.get(key)
            if vt is not None:
                taints.append(vt)
        if not taints:
            return CLEAN
        vt = join_taints(taints)
        if vt.clean:
            return vt
        return VarTaint(
            vt.tf, vt.tr,
            extend(vt.prov_f, self._file_of(span), span.line,
                   "prop-read", cfg.qualified),
            extend(vt.prov_r, self._file_of(span), span.line,
                   "prop-read", cfg.qualified))

    def _prop_write(self, stmt: PropWrite, state: _FunctionState,
                    entry: dict[int, VarTaint], span, cfg: Cfg) -> None:
        vt = self._taint_of(stmt.src, state, entry, span)
        if vt.clean:
            return
        vt = VarTaint(
            vt.tf, vt.tr,
            extend(vt.prov_f, self._file_of(span), span.line,
                   "prop-write", cfg.qualified),
            extend(vt.prov_r, self._file_of(span), span.line,
                   "prop-write", cfg.qualified))
        cands = self._prop_key_candidates(stmt.cls, stmt.receiver,
                                          stmt.prop, cfg)
        if not cands and stmt.cls is None:
            # property of an object we cannot type: fall back to the
            # receiver-agnostic bucket keyed by the bare property name
            cands = ["<any>"]
        for cand in cands:
            key = (self._declaring_class(cand, stmt.prop), stmt.prop)
            state.prop_writes[key] = join_taint(
                state.prop_writes.get(key, CLEAN), vt)

    def _collect_props(self) -> dict[tuple[str, str], VarTaint]:
        # root summaries (clean entries) carry every reachable write with
        # absolute provenance; tainted-entry summaries are already folded
        # into their callers
        collected: dict[tuple[str, str], VarTaint] = {}
        for key in sorted(self.table):
            if key[1]:
                continue
            for prop_key, vt in self.table[key].prop_writes:
                collected[prop_key] = join_taint(
                    collected.get(prop_key, CLEAN), vt)
        return collected

    @staticmethod
    def _props_equal(a: dict, b: dict) -> bool:
        if set(a) != set(b):
            return False
        return all(a[k] == b[k] for k in a)

    # -- calls ------------------------------------------------------------

    def _registry_idents(self, stmt: CallStmt) -> list[str]:
        idents = []
        if stmt.style == "func" and stmt.func_name:
            idents.append(stmt.func_name)
        for target in self.callgraph.edges.get(stmt.site_id, ()):
            idents.append(target.fn.qualified)
        if stmt.style in ("method", "static") and isinstance(stmt.method_ref, str):
            if isinstance(stmt.class_ref, str) and \
                    not stmt.class_ref.startswith("parent-of:"):
                idents.append(f"{stmt.class_ref}::{stmt.method_ref}".lower())
        seen = set()
        out = []
        for ident in idents:
            if ident not in seen:
                seen.add(ident)
                out.append(ident)
        return out

    def _call(self, stmt: CallStmt, state: _FunctionState, cfg: Cfg,
              entry: dict[int, VarTaint]) -> None:
        span = stmt.span
        consts = self.consts[cfg.qualified]
        args = [self._taint_of(a, state, entry, span) for a in stmt.args]
        recv = (self._taint_of(stmt.receiver, state, entry, span)
                if stmt.receiver is not None else CLEAN)
        fname = stmt.func_name if stmt.style == "func" else None

        if fname == "extract":
            # element flows are materialised as synthesized reads at the
            # later use sites, the call itself produces nothing
            self._set_dst(stmt, state, CLEAN)
            return
        if fname in transfer.SANITIZING_CALLS:
            self._set_dst(stmt, state, CLEAN)
            return
        if fname in transfer.REQUEST_SANITIZING_CALLS and args:
            self._set_dst(stmt, state,
                          VarTaint(args[0].tf, SAFE, args[0].prov_f, None))
            return

        idents = self._registry_idents(stmt)
        matched_sink = None
        matched_source = None
        for ident in idents:
            matched_sink = matched_sink or self.registry.sink_for(ident)
            matched_source = matched_source or self.registry.source_for(ident)

        if matched_sink is not None:
            self._sink_check(stmt, matched_sink, args, consts, span,
                             state, cfg)
        if matched_source is not None:
            root = SourceRoot(matched_source.identifier,
                              self._file_of(span), span.line)
            self._set_dst(stmt, state, VarTaint(
                scalar_triplet(TAU), scalar_triplet(TAU), root, root))
            return
        if matched_sink is not None:
            # sink calls yield handles/response codes, not attacker data
            self._set_dst(stmt, state, CLEAN)
            return

        targets = self.callgraph.edges.get(stmt.site_id, ())
        if targets:
            self._project_call(stmt, targets, args, recv, state, cfg, span)
            return

        # unknown external call: argument merge
        pool = list(args)
        if stmt.receiver is not None:
            pool.append(recv)
        vt = transfer.api_call_taint(pool)
        if not vt.clean:
            vt = VarTaint(
                vt.tf, vt.tr,
                extend(vt.prov_f, self._file_of(span), span.line,
                       "call", cfg.qualified),
                extend(vt.prov_r, self._file_of(span), span.line,
                       "call", cfg.qualified))
        self._set_dst(stmt, state, vt)

    def _set_dst(self, stmt: CallStmt, state: _FunctionState,
                 vt: VarTaint) -> None:
        if stmt.dst is not None:
            state.set(stmt.dst, vt)

    def _sink_check(self, stmt: CallStmt, spec, args, consts: ConstMap,
                    span, state: _FunctionState, cfg: Cfg) -> None:
        idx = spec.url_param_index
        if spec.identifier == "curl_setopt":
            # only the URL option takes a request target; a known non-URL
            # option never fires, an unknown option is assumed hostile
            if len(stmt.args) > 1:
                opt = consts.of_operand(stmt.args[1])
                if consts.operand_known(stmt.args[1]) and opt != "CURLOPT_URL":
                    return
        if idx >= len(args):
            return
        vt = args[idx]
        fire_file = spec.accepts in (ACCEPTS_FILE, ACCEPTS_BOTH) \
            and vt.tf.self_t == TAU
        fire_request = spec.accepts in (ACCEPTS_REQUEST, ACCEPTS_BOTH) \
            and vt.tr.self_t == TAU
        file = self._file_of(span)
        if fire_file:
            event = SinkEvent(spec.identifier, KIND_FILE, file, span.line,
                              vt.prov_f, cfg.qualified, spec.provenance)
            state.events[(event.site_key(), vt.prov_f)] = event
        if fire_request:
            event = SinkEvent(spec.identifier, KIND_REQUEST, file, span.line,
                              vt.prov_r, cfg.qualified, spec.provenance)
            state.events[(event.site_key(), vt.prov_r)] = event

    def _project_call(self, stmt: CallStmt, targets, args, recv,
                      state: _FunctionState, cfg: Cfg, span) -> None:
        file = self._file_of(span)
        results = []
        for target in targets:
            callee = target.fn
            callee_cfg = self.cfgs.get(callee.qualified)
            if callee_cfg is None:
                continue
            bind_args = args
            if stmt.style == "func" and stmt.func_name in (
                    "call_user_func", "call_user_func_array"):
                bind_args = self._cuf_args(stmt, args, callee_cfg)
            entry2: dict[int, VarTaint] = {}
            chains_f: dict[int, Optional[Prov]] = {}
            chains_r: dict[int, Optional[Prov]] = {}
            if target.kind == "magic":
                packed = transfer.magic_args_taint(bind_args)
                if not packed.clean:
                    entry2[1] = _strip(packed)
                    chains_f[1] = extend(packed.prov_f, file, span.line,
                                         "call", cfg.qualified)
                    chains_r[1] = extend(packed.prov_r, file, span.line,
                                         "call", cfg.qualified)
            else:
                formal_count = len(callee_cfg.params)
                variadic = callee.is_variadic
                for i, vt in enumerate(bind_args):
                    if vt.clean:
                        continue
                    slot = i
                    if i >= formal_count:
                        if not variadic or formal_count == 0:
                            continue
                        slot = formal_count - 1
                    merged = join_taint(entry2.get(slot, CLEAN), vt)
                    entry2[slot] = _strip(merged)
                    if chains_f.get(slot) is None:
                        chains_f[slot] = extend(vt.prov_f, file, span.line,
                                                "call", cfg.qualified)
                    if chains_r.get(slot) is None:
                        chains_r[slot] = extend(vt.prov_r, file, span.line,
                                                "call", cfg.qualified)
            if stmt.receiver is not None and not recv.clean:
                entry2[-1] = _strip(recv)
                chains_f[-1] = extend(recv.prov_f, file, span.line,
                                      "call", cfg.qualified)
                chains_r[-1] = extend(recv.prov_r, file, span.line,
                                      "call", cfg.qualified)

            summary = self._summary_for(callee.qualified, entry2)

            ret = summary.ret
            if not ret.clean:
                prov_f = splice(ret.prov_f, chains_f)
                prov_r = splice(ret.prov_r, chains_r)
                results.append(VarTaint(ret.tf, ret.tr, prov_f, prov_r))
            for event in summary.events:
                chains = chains_f if event.kind == KIND_FILE else chains_r
                chain = splice(event.chain, chains)
                spliced = SinkEvent(event.sink_id, event.kind, event.file,
                                    event.line, chain, event.fn,
                                    event.provenance)
                state.events[(spliced.site_key(), chain)] = spliced
            for prop_key, vt in summary.prop_writes:
                spliced = VarTaint(
                    vt.tf, vt.tr,
                    splice(vt.prov_f, chains_f), splice(vt.prov_r, chains_r))
                state.prop_writes[prop_key] = join_taint(
                    state.prop_writes.get(prop_key, CLEAN), spliced)
        if stmt.dst is not None:
            state.set(stmt.dst, join_taints(results) if results else CLEAN)

    def _cuf_args(self, stmt: CallStmt, args: list[VarTaint],
                  callee_cfg: Cfg) -> list[VarTaint]:
        if stmt.func_name == "call_user_func":
            return args[1:]
        if len(args) < 2:
            return []
        packed = args[1]
        out = []
        for i in range(len(callee_cfg.params)):
            out.append(transfer.elem_read_taint(packed, i))
        return out

    # -- findings ---------------------------------------------------------

    def _assemble_paths(self, events: list[SinkEvent]) -> list[TaintPath]:
        grouped: dict[tuple, set[str]] = {}
        meta: dict[tuple, tuple[PathPoint, PathPoint, tuple]] = {}
        for event in events:
            if event.chain is None:
                continue
            root = root_of(event.chain)
            if not isinstance(root, SourceRoot):
                continue        # never left the formals of some root
            hops = tuple((h.file, h.line, h.rule, h.fn)
                         for h in chain_hops(event.chain))
            source = PathPoint(root.identifier, root.file, root.line)
            sink = PathPoint(event.sink_id, event.file, event.line)
            key = (source, sink, hops)
            grouped.setdefault(key, set()).add(event.kind)
            meta[key] = (source, sink, hops, event.fn, event.provenance)
        paths = []
        for key in sorted(grouped, key=lambda k: (
                k[1].file, k[1].line, k[1].identifier,
                k[0].file, k[0].line, k[0].identifier, k[2])):
            source, sink, hops, sink_fn, provenance = meta[key]
            kinds = grouped[key]
            if kinds == {KIND_FILE, KIND_REQUEST}:
                kind = "both"
            else:
                kind = next(iter(kinds))
            paths.append(TaintPath(source, sink, hops, kind, sink_fn,
                                   provenance))
        return paths


def analyze_taint(project: Project, cfgs: dict[str, Cfg],
                  callgraph: CallGraph, registry: Registry,
                  types: TypeTable, consts: dict[str, ConstMap],
                  safety_strings: bool = True,
                  fixpoint_budget: int = 64) -> TaintResult:
    engine = TaintEngine(project, cfgs, callgraph, registry, types, consts,
                         safety_strings=safety_strings,
                         fixpoint_budget=fixpoint_budget)
    return engine.run()


def format_value_taints(cfg: Cfg, env: dict[int, VarTaint]) -> str:
    lines = [f"function {cfg.display}"]
    for vid in sorted(env):
        vt = env[vid]
        name = cfg.value_names.get(vid)
        label = f"v{vid}" + (f" (${name})" if name else "")
        lines.append(f"  {label}: {vt!r}")
    return "\n".join(lines)
