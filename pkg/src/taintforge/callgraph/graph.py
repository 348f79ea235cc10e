"""Call-graph construction: explicit signature matching plus the implicit
resolution families for dynamic calls (magic methods, variable class names,
variable method names, and their combination).

Every call site resolves to a deterministic, sorted set of targets.  The
over-approximation is deliberate: downstream taint summaries and path pruning
cut the noise, so resolution errs toward completeness."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

from ..frontend.project import ClassInfo, FunctionInfo, Project
from ..ir.constvals import ConstMap, compute_consts
from ..ir.ssa import ArrayInit, CallStmt, Cfg, Const, Operand, Value
from .typeinfo import ANY, TypeInfo, TypeTable, infer_types

KIND_EXPLICIT = "explicit"
KIND_MAGIC = "magic"
KIND_VAR_CLASS = "var_class"
KIND_VAR_METHOD = "var_method"
KIND_VAR_BOTH = "var_both"

_CALL_USER_FUNCS = ("call_user_func", "call_user_func_array")


@dataclass(frozen=True)
class CallTarget:
    fn: FunctionInfo
    kind: str


@dataclass
class SiteRecord:
    site_id: int
    caller: str               # qualified name of the containing function
    stmt: CallStmt
    file: str
    line: int
    form: str


@dataclass
class CallGraph:
    sites: dict[int, SiteRecord] = field(default_factory=dict)
    edges: dict[int, tuple[CallTarget, ...]] = field(default_factory=dict)
    unresolved: set[int] = field(default_factory=set)

    def targets(self, site_id: int) -> tuple[CallTarget, ...]:
        return self.edges.get(site_id, ())

    def dump(self) -> str:
        lines = []
        for site_id in sorted(self.sites):
            rec = self.sites[site_id]
            for target in self.edges.get(site_id, ()):
                lines.append(f"{rec.file}:{rec.line} {rec.form} -> "
                             f"{target.fn.name} ({target.kind})")
            if site_id in self.unresolved:
                lines.append(f"{rec.file}:{rec.line} {rec.form} -> <unresolved>")
        return "\n".join(lines)


@dataclass
class _SiteShape:
    """A call site normalized for resolution."""
    style: str                          # func | static | method | new
    class_lit: Optional[str] = None     # lowercased literal class
    class_type: TypeInfo = ANY
    method_lit: Optional[str] = None    # lowercased literal method
    func_lit: Optional[str] = None      # lowercased free-function name
    args: list[Operand] = field(default_factory=list)
    arg_types: list[TypeInfo] = field(default_factory=list)
    argc: Optional[int] = None          # None: arity unknown (spread callable)
    form: str = "?"


class _Resolver:
    def __init__(self, project: Project, types: TypeTable,
                 implicit: bool) -> None:
        self.project = project
        self.types = types
        self.implicit = implicit
        self._sorted_classes = [self.project.classes[k]
                                for k in sorted(self.project.classes)]

    # -- shape extraction --

    def shape(self, cfg: Cfg, fn: Optional[FunctionInfo], stmt: CallStmt,
              consts: ConstMap) -> _SiteShape:
        if stmt.style in ("func", "var_func"):
            return self._shape_callable(cfg, fn, stmt, consts)
        if stmt.style == "new":
            cls_lit, cls_type = self._class_parts(cfg, fn, stmt.class_ref, consts)
            form = f"new {stmt.class_ref}" if cls_lit else "new $c"
            return _SiteShape(style="new", class_lit=cls_lit, class_type=cls_type,
                              method_lit="__construct", args=list(stmt.args),
                              argc=len(stmt.args), form=form)
        if stmt.style == "static":
            cls_lit, cls_type = self._class_parts(cfg, fn, stmt.class_ref, consts)
            m_lit = self._method_part(stmt.method_ref, consts)
            c = cls_lit or "$c"
            m = m_lit or "$m"
            form = f"{c if cls_lit else '$c'}::{m if m_lit else '$m'}"
            return _SiteShape(style="static", class_lit=cls_lit,
                              class_type=cls_type, method_lit=m_lit,
                              args=list(stmt.args), argc=len(stmt.args),
                              form=form)
        # instance method call
        recv_type = self.types.operand_type(cfg.qualified, stmt.receiver, fn) \
            if stmt.receiver is not None else ANY
        m_lit = self._method_part(stmt.method_ref, consts)
        form = f"$v->{m_lit}" if m_lit else "$v->$m"
        return _SiteShape(style="method", class_type=recv_type, method_lit=m_lit,
                          args=list(stmt.args), argc=len(stmt.args), form=form)

    def _class_parts(self, cfg: Cfg, fn: Optional[FunctionInfo],
                     class_ref: Union[str, Operand, None],
                     consts: ConstMap) -> tuple[Optional[str], TypeInfo]:
        if isinstance(class_ref, str):
            if class_ref.startswith("parent-of:"):
                child = class_ref.split(":", 1)[1]
                info = self.project.classes.get(child)
                return (info.parent if info else None), ANY
            return class_ref, ANY
        if class_ref is None:
            return None, ANY
        name = consts.string_of(class_ref)
        if name:
            return name.lstrip("\\").lower(), ANY
        return None, self.types.operand_type(cfg.qualified, class_ref, fn)

    def _method_part(self, method_ref: Union[str, Operand, None],
                     consts: ConstMap) -> Optional[str]:
        if isinstance(method_ref, str):
            return method_ref.lower()
        if method_ref is None:
            return None
        name = consts.string_of(method_ref)
        return name.lower() if name else None

    def _shape_callable(self, cfg: Cfg, fn: Optional[FunctionInfo],
                        stmt: CallStmt, consts: ConstMap) -> _SiteShape:
        """Free-function style sites, including the call_user_func rewrites."""
        defs = cfg.def_map()
        if stmt.style == "func" and stmt.func_name in _CALL_USER_FUNCS:
            if not stmt.args:
                return _SiteShape(style="func", form="call_user_func", argc=0)
            callable_op = stmt.args[0]
            if stmt.func_name == "call_user_func":
                args = list(stmt.args[1:])
                argc: Optional[int] = len(args)
            else:
                args, argc = self._spread_args(stmt.args[1] if len(stmt.args) > 1 else None,
                                               defs, consts)
            return self._callable_shape(cfg, fn, callable_op, args, argc,
                                        defs, consts, form_hint="call_user_func")
        if stmt.style == "var_func":
            return self._callable_shape(cfg, fn, stmt.method_ref, list(stmt.args),
                                        len(stmt.args), defs, consts,
                                        form_hint="$f()")
        name = stmt.func_name or ""
        return _SiteShape(style="func", func_lit=name, args=list(stmt.args),
                          argc=len(stmt.args), form=f"{stmt.func_display or name}()")

    def _spread_args(self, arr_op: Optional[Operand], defs, consts: ConstMap) \
            -> tuple[list[Operand], Optional[int]]:
        if isinstance(arr_op, Value):
            stmt = defs.get(arr_op.id)
            if isinstance(stmt, ArrayInit):
                return [v for _, v in stmt.elems], len(stmt.elems)
        return [], None   # arity unknown

    def _callable_shape(self, cfg: Cfg, fn: Optional[FunctionInfo],
                        callable_op: Union[Operand, str, None],
                        args: list[Operand], argc: Optional[int],
                        defs, consts: ConstMap, form_hint: str) -> _SiteShape:
        if isinstance(callable_op, str):   # shouldn't happen, defensive
            callable_op = Const(callable_op)
        name = consts.string_of(callable_op) if callable_op is not None else None
        if name:
            name = name.lstrip("\\")
            if "::" in name:
                cls, method = name.split("::", 1)
                return _SiteShape(style="static", class_lit=cls.lower(),
                                  method_lit=method.lower(), args=args, argc=argc,
                                  form=f"{cls}::{method}")
            return _SiteShape(style="func", func_lit=name.lower(), args=args,
                              argc=argc, form=f"{name}()")
        if isinstance(callable_op, Value):
            def_stmt = defs.get(callable_op.id)
            if isinstance(def_stmt, ArrayInit) and len(def_stmt.elems) == 2:
                recv_op = def_stmt.elems[0][1]
                method = consts.string_of(def_stmt.elems[1][1])
                cls_name = consts.string_of(recv_op)
                if method and cls_name:
                    return _SiteShape(style="static",
                                      class_lit=cls_name.lstrip("\\").lower(),
                                      method_lit=method.lower(), args=args,
                                      argc=argc, form=f"{cls_name}::{method}")
                if method:
                    recv_type = self.types.operand_type(cfg.qualified, recv_op, fn)
                    return _SiteShape(style="method", class_type=recv_type,
                                      method_lit=method.lower(), args=args,
                                      argc=argc, form=f"$v->{method}")
        # unknown callable: both class and method variable
        return _SiteShape(style="method", class_type=ANY, method_lit=None,
                          args=args, argc=argc, form=form_hint)

    # -- family resolution --

    def resolve(self, cfg: Cfg, fn: Optional[FunctionInfo],
                shape: _SiteShape) -> list[CallTarget]:
        if shape.style == "func":
            return self._resolve_free(shape)
        static_style = shape.style in ("static", "new")
        candidates = self._class_candidates(shape)
        targets: list[CallTarget] = []
        if shape.method_lit is not None and candidates is not None:
            targets = self._family_explicit(candidates, shape)
            if not targets and self.implicit and shape.style != "new":
                targets = self._family_magic_chain(candidates, static_style)
        elif not self.implicit:
            return []
        elif shape.method_lit is not None:     # variable class: family (c)
            targets = self._family_var_class(shape, static_style)
        elif candidates is not None:           # variable method: family (d)
            targets = self._family_var_method(candidates, shape, static_style)
        else:                                  # both variable: family (e)
            targets = self._family_var_both(shape, static_style)
        return _dedupe(targets)

    def _class_candidates(self, shape: _SiteShape) -> Optional[list[str]]:
        if shape.class_lit is not None:
            return [shape.class_lit]
        t = shape.class_type
        if t.candidates:
            return sorted(t.candidates)
        return None

    def _resolve_free(self, shape: _SiteShape) -> list[CallTarget]:
        fn = self.project.functions.get(shape.func_lit or "")
        if fn is None:
            return []
        if shape.argc is not None and not fn.accepts_arity(shape.argc):
            return []
        return [CallTarget(fn, KIND_EXPLICIT)]

    def _lookup_in_chain(self, class_key: str, method: str,
                         argc: Optional[int]) -> Optional[FunctionInfo]:
        for cls in self.project.ancestry(class_key):
            cand = cls.methods.get(method)
            if cand is not None and not cand.is_abstract:
                if argc is None or cand.accepts_arity(argc):
                    return cand
        return None

    def _family_explicit(self, candidates: list[str],
                         shape: _SiteShape) -> list[CallTarget]:
        out = []
        for class_key in candidates:
            found = self._lookup_in_chain(class_key, shape.method_lit or "",
                                          shape.argc)
            if found is not None:
                out.append(CallTarget(found, KIND_EXPLICIT))
        return out

    def _family_magic_chain(self, candidates: list[str],
                            static_style: bool) -> list[CallTarget]:
        magic = "__callstatic" if static_style else "__call"
        out = []
        for class_key in candidates:
            for cls in self.project.ancestry(class_key):
                cand = cls.methods.get(magic)
                if cand is not None and not cand.is_abstract:
                    out.append(CallTarget(cand, KIND_MAGIC))
                    break
        return out

    def _family_var_class(self, shape: _SiteShape,
                          static_style: bool) -> list[CallTarget]:
        method = shape.method_lit or ""
        out = []
        for cls in self._sorted_classes:
            cand = cls.methods.get(method)
            if cand is not None and not cand.is_abstract and not cand.is_variadic \
                    and (shape.argc is None or cand.accepts_arity(shape.argc)):
                out.append(CallTarget(cand, KIND_VAR_CLASS))
        if out or shape.style == "new":
            return out
        # no arity-matching method anywhere: all magic methods, any arity
        return self._all_magic(static_style)

    def _family_var_method(self, candidates: list[str],
                           shape: _SiteShape, static_style: bool) -> list[CallTarget]:
        out = []
        for class_key in candidates:
            seen: set[str] = set()
            for cls in self.project.ancestry(class_key):
                for name in sorted(cls.methods):
                    if name in seen:
                        continue   # overridden nearer the receiver class
                    seen.add(name)
                    cand = cls.methods[name]
                    if cand.is_abstract or cand.is_variadic:
                        continue
                    if name in ("__call", "__callstatic"):
                        out.append(CallTarget(cand, KIND_MAGIC))
                    elif shape.argc is not None and cand.accepts_arity(shape.argc):
                        out.append(CallTarget(cand, KIND_VAR_METHOD))
        return out

    def _family_var_both(self, shape: _SiteShape,
                         static_style: bool) -> list[CallTarget]:
        arg_types = shape.arg_types
        out = []
        for cls in self._sorted_classes:
            for name in sorted(cls.methods):
                cand = cls.methods[name]
                if cand.is_abstract or cand.is_variadic:
                    continue
                if name in ("__call", "__callstatic"):
                    out.append(CallTarget(cand, KIND_MAGIC))
                    continue
                if shape.argc is None:
                    out.append(CallTarget(cand, KIND_VAR_BOTH))
                    continue
                if not cand.accepts_arity(shape.argc):
                    continue
                if self._args_compatible(arg_types, cand):
                    out.append(CallTarget(cand, KIND_VAR_BOTH))
        return out

    def _args_compatible(self, arg_types: list[TypeInfo],
                         cand: FunctionInfo) -> bool:
        for i, actual in enumerate(arg_types):
            if i >= len(cand.params):
                return False
            if not self.types.compatible(actual, cand.params[i].effective_type):
                return False
        return True

    def _all_magic(self, static_style: bool) -> list[CallTarget]:
        wanted = "__callstatic" if static_style else "__call"
        out = []
        for cls in self._sorted_classes:
            cand = cls.methods.get(wanted)
            if cand is not None and not cand.is_abstract:
                out.append(CallTarget(cand, KIND_MAGIC))
        return out


def _dedupe(targets: list[CallTarget]) -> list[CallTarget]:
    seen: set[str] = set()
    out = []
    for t in sorted(targets, key=lambda t: t.fn.qualified):
        if t.fn.qualified not in seen:
            seen.add(t.fn.qualified)
            out.append(t)
    return out


def build_callgraph(project: Project, cfgs: dict[str, Cfg],
                    types: Optional[TypeTable] = None,
                    consts: Optional[dict[str, ConstMap]] = None,
                    implicit: bool = True) -> CallGraph:
    if types is None:
        types = infer_types(project, cfgs)
    if consts is None:
        consts = {q: compute_consts(c) for q, c in cfgs.items()}
    functions = {f.qualified: f for f in project.all_functions()}
    resolver = _Resolver(project, types, implicit)
    graph = CallGraph()
    for qualified in sorted(cfgs):
        cfg = cfgs[qualified]
        fn = functions.get(qualified)
        cmap = consts[qualified]
        file_path = project.file_by_id(cfg.file_id).path
        for stmt in cfg.call_sites():
            shape = resolver.shape(cfg, fn, stmt, cmap)
            shape.arg_types = [types.operand_type(qualified, a, fn)
                               for a in shape.args]
            targets = resolver.resolve(cfg, fn, shape)
            graph.sites[stmt.site_id] = SiteRecord(
                site_id=stmt.site_id, caller=qualified, stmt=stmt,
                file=file_path, line=stmt.span.line, form=shape.form)
            if targets:
                graph.edges[stmt.site_id] = tuple(targets)
            else:
                graph.unresolved.add(stmt.site_id)
    return graph
