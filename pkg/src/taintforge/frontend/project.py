"""Project loading: file discovery, parsing, and symbol tables.

Files are discovered under a root directory, filtered by exclude globs, and
assigned dense ``file_id`` values in lexicographic path order so everything
downstream is deterministic.  PHP class/function/method names are compared
case-insensitively (PHP semantics); tables are keyed on the lowercased name
with original spellings preserved for display.
"""
from __future__ import annotations

import fnmatch
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .astnodes import AstNode, Kind, ROLE_NAME, ROLE_PARAMS, ROLE_STMTS, ROLE_VALUE
from .parser import PhpParseError, parse_php

log = logging.getLogger(__name__)

SUPERGLOBALS = ("_GET", "_POST", "_REQUEST", "_COOKIE", "_SERVER")

SCALAR_TYPES = {"string", "int", "integer", "float", "double", "bool", "boolean",
                "array", "mixed", "void", "object", "callable", "null", "false", "true",
                "self", "static", "this"}

_TYPE_NORMALIZE = {"integer": "int", "double": "float", "boolean": "bool",
                   "false": "bool", "true": "bool", "this": "self"}


@dataclass
class ParseFailure:
    path: str
    line: int
    message: str


@dataclass
class SourceFile:
    file_id: int
    path: str          # relative to the project root, posix separators
    text: str
    ast: AstNode


@dataclass
class Param:
    name: str
    type: Optional[str] = None       # declared hint, normalized
    doc_type: Optional[str] = None   # from @param
    has_default: bool = False
    variadic: bool = False

    @property
    def effective_type(self) -> Optional[str]:
        return self.type or self.doc_type


@dataclass
class FunctionInfo:
    """A function, method, or file top-level pseudo-function."""

    name: str                       # display name ("getRss", "Client::get", "<main>")
    qualified: str                  # unique key, lowercased for methods/functions
    file_id: int
    node: Optional[AstNode]         # FUNC_DECL / METHOD_DECL; None for top-level
    body: AstNode                   # STMT_LIST
    params: list[Param] = field(default_factory=list)
    class_name: Optional[str] = None   # owning class display name
    is_static: bool = False
    visibility: str = "public"
    is_abstract: bool = False
    doc: Optional[str] = None
    doc_return: Optional[str] = None
    line: int = 0

    @property
    def is_variadic(self) -> bool:
        return any(p.variadic for p in self.params)

    @property
    def required_count(self) -> int:
        count = 0
        for p in self.params:
            if p.has_default or p.variadic:
                break
            count += 1
        return count

    @property
    def param_count(self) -> int:
        return len(self.params)

    def accepts_arity(self, k: int) -> bool:
        if self.is_variadic:
            return k >= self.required_count
        return self.required_count <= k <= self.param_count


@dataclass
class PropInfo:
    name: str
    class_name: str
    is_static: bool = False
    doc_type: Optional[str] = None
    default: Optional[AstNode] = None
    line: int = 0


@dataclass
class ClassInfo:
    name: str                        # display name, fully qualified
    file_id: int
    node: AstNode
    parent: Optional[str] = None     # lowercased parent key
    interfaces: list[str] = field(default_factory=list)
    is_abstract: bool = False
    is_interface: bool = False
    methods: dict[str, FunctionInfo] = field(default_factory=dict)   # lower name -> info
    props: dict[str, PropInfo] = field(default_factory=dict)
    doc: Optional[str] = None


class DuplicateClassError(Exception):
    def __init__(self, name: str, first_file: str, dup_file: str):
        super().__init__(f"class {name} defined in {first_file} and {dup_file}")
        self.name = name
        self.first_file = first_file
        self.dup_file = dup_file


@dataclass
class Project:
    root: str
    files: list[SourceFile]
    classes: dict[str, ClassInfo]            # lower fqdn -> info
    functions: dict[str, FunctionInfo]       # lower name -> free functions
    mains: list[FunctionInfo]                # per-file top-level pseudo-functions
    parse_failures: list[ParseFailure]
    duplicate_classes: list[DuplicateClassError] = field(default_factory=list)

    def file_by_id(self, file_id: int) -> SourceFile:
        return self.files[file_id]

    def file_by_path(self, rel: str) -> Optional[SourceFile]:
        for f in self.files:
            if f.path == rel:
                return f
        return None

    def all_functions(self) -> list[FunctionInfo]:
        """Every analyzable function in deterministic order."""
        out: list[FunctionInfo] = list(self.mains)
        for fname in sorted(self.functions):
            out.append(self.functions[fname])
        for cname in sorted(self.classes):
            cls = self.classes[cname]
            for mname in sorted(cls.methods):
                out.append(cls.methods[mname])
        return out

    def lookup_function(self, qualified: str) -> Optional[FunctionInfo]:
        for fn in self.all_functions():
            if fn.qualified == qualified or fn.name == qualified:
                return fn
        return None

    def ancestry(self, class_key: str) -> list[ClassInfo]:
        """The class and its parents, nearest first.  Cycles are broken."""
        out: list[ClassInfo] = []
        seen: set[str] = set()
        key: Optional[str] = class_key
        while key and key not in seen:
            seen.add(key)
            cls = self.classes.get(key)
            if cls is None:
                break
            out.append(cls)
            key = cls.parent
        return out


def discover_files(root: Path, excludes: tuple[str, ...] = ()) -> list[Path]:
    found = []
    for path in sorted(root.rglob("*.php"), key=lambda p: p.relative_to(root).as_posix()):
        rel = path.relative_to(root).as_posix()
        if any(fnmatch.fnmatch(rel, pat) or fnmatch.fnmatch("/" + rel, pat)
               for pat in excludes):
            continue
        found.append(path)
    return found


def load_project(root: str | Path, excludes: tuple[str, ...] = (),
                 jobs: int = 1) -> Project:
    root_path = Path(root)
    if not root_path.is_dir():
        raise FileNotFoundError(f"project root {root} is not a directory")
    paths = discover_files(root_path, excludes)

    def read_one(path: Path) -> tuple[str, str]:
        rel = path.relative_to(root_path).as_posix()
        text = path.read_bytes().decode("utf-8", errors="replace")
        return rel, text

    if jobs > 1 and len(paths) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            raw = list(pool.map(read_one, paths))
    else:
        raw = [read_one(p) for p in paths]

    files: list[SourceFile] = []
    failures: list[ParseFailure] = []
    parsed: list[Optional[tuple[str, str, AstNode]]] = [None] * len(raw)

    def parse_one(idx: int) -> None:
        rel, text = raw[idx]
        try:
            ast = parse_php(text, idx)
        except PhpParseError as exc:
            parsed[idx] = (rel, text, exc)  # type: ignore[assignment]
            return
        parsed[idx] = (rel, text, ast)

    if jobs > 1 and len(raw) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            list(pool.map(parse_one, range(len(raw))))
    else:
        for i in range(len(raw)):
            parse_one(i)

    # Reassign dense ids over successfully parsed files, in path order.
    kept: list[tuple[str, str, AstNode]] = []
    for entry in parsed:
        assert entry is not None
        rel, text, result = entry
        if isinstance(result, PhpParseError):
            failures.append(ParseFailure(rel, result.line, result.message))
            log.warning("skipping %s: %s", rel, result)
        else:
            kept.append((rel, text, result))

    for new_id, (rel, text, ast) in enumerate(kept):
        _renumber_file(ast, new_id)
        files.append(SourceFile(new_id, rel, text, ast))

    project = Project(root=str(root), files=files, classes={}, functions={},
                      mains=[], parse_failures=failures)
    for src in files:
        _index_file(project, src)
    return project


def _renumber_file(ast: AstNode, file_id: int) -> None:
    for node in ast.walk():
        if node.span.file_id != file_id:
            node.span = node.span.__class__(file_id, node.span.line, node.span.col,
                                            node.span.start, node.span.end)


def _index_file(project: Project, src: SourceFile) -> None:
    top_level = AstNode(Kind.STMT_LIST, src.ast.span)
    for role, child in src.ast.children:
        if child.kind == Kind.FUNC_DECL:
            info = _function_from_node(child, src.file_id)
            if info.qualified not in project.functions:
                project.functions[info.qualified] = info
        elif child.kind == Kind.CLASS_DECL:
            _index_class(project, child, src)
        else:
            top_level.add(role, child)
    if top_level.children:
        main = FunctionInfo(
            name="<main>",
            qualified=f"<main>@{src.path}",
            file_id=src.file_id,
            node=None,
            body=top_level,
            line=top_level.children[0][1].span.line,
        )
        project.mains.append(main)


def _index_class(project: Project, node: AstNode, src: SourceFile) -> None:
    name_node = node.child(ROLE_NAME)
    assert name_node is not None
    display = str(name_node.value or name_node.text)
    key = display.lower()
    if key in project.classes:
        first = project.classes[key]
        project.duplicate_classes.append(
            DuplicateClassError(display, project.files[first.file_id].path, src.path))
        return
    cls = ClassInfo(
        name=display,
        file_id=src.file_id,
        node=node,
        parent=(str(node.attrs["parent"]).lower() if node.attrs.get("parent") else None),
        interfaces=[str(i).lower() for i in node.attrs.get("interfaces", [])],
        is_abstract=bool(node.attrs.get("abstract")),
        is_interface=bool(node.attrs.get("interface")),
        doc=node.attrs.get("doc"),
    )
    for _, member in node.children:
        if member.kind == Kind.METHOD_DECL:
            info = _function_from_node(member, src.file_id, class_name=display)
            cls.methods[info.name.split("::")[-1].lower()] = info
        elif member.kind == Kind.PROP_DECL:
            _add_prop(cls, member)
        elif member.kind == Kind.STMT_LIST:  # grouped property declaration
            for _, sub in member.children:
                if sub.kind == Kind.PROP_DECL:
                    _add_prop(cls, sub)
    project.classes[key] = cls


def _add_prop(cls: ClassInfo, member: AstNode) -> None:
    name_node = member.child(ROLE_NAME)
    if name_node is None:
        return
    pname = str(name_node.value)
    doc_type = None
    doc = member.attrs.get("doc")
    if doc:
        doc_type = parse_doc(doc).var_type
    if doc_type is None and member.attrs.get("type"):
        doc_type = normalize_type(str(member.attrs["type"]))
    cls.props[pname] = PropInfo(
        name=pname,
        class_name=cls.name,
        is_static=bool(member.attrs.get("static")),
        doc_type=doc_type,
        default=member.child(ROLE_VALUE),
        line=member.span.line,
    )


def _function_from_node(node: AstNode, file_id: int,
                        class_name: Optional[str] = None) -> FunctionInfo:
    name_node = node.child(ROLE_NAME)
    assert name_node is not None
    bare = str(name_node.value or name_node.text)
    doc = node.attrs.get("doc")
    doc_info = parse_doc(doc) if doc else DocInfo()
    params: list[Param] = []
    params_node = node.child(ROLE_PARAMS)
    if params_node is not None:
        for _, p in params_node.children:
            pname_node = p.child(ROLE_NAME)
            pname = str(pname_node.value) if pname_node is not None else "?"
            params.append(Param(
                name=pname,
                type=normalize_type(p.attrs.get("type")) if p.attrs.get("type") else None,
                doc_type=doc_info.param_types.get(pname),
                has_default=bool(p.attrs.get("has_default")),
                variadic=bool(p.attrs.get("variadic")),
            ))
    body = node.child(ROLE_STMTS)
    if body is None:
        body = AstNode(Kind.STMT_LIST, node.span)
    if class_name:
        display = f"{class_name}::{bare}"
        qualified = f"{class_name.lower()}::{bare.lower()}"
    else:
        display = bare
        qualified = bare.lower()
    doc_return = doc_info.return_type
    if doc_return is None and node.attrs.get("return_type"):
        doc_return = normalize_type(str(node.attrs["return_type"]))
    return FunctionInfo(
        name=display,
        qualified=qualified,
        file_id=file_id,
        node=node,
        body=body,
        params=params,
        class_name=class_name,
        is_static=bool(node.attrs.get("static")),
        visibility=str(node.attrs.get("visibility", "public")),
        is_abstract=bool(node.attrs.get("abstract")),
        doc=doc,
        doc_return=doc_return,
        line=node.span.line,
    )


# ---- doc comment parsing ----------------------------------------------

@dataclass
class DocInfo:
    summary: str = ""
    var_type: Optional[str] = None
    param_types: dict[str, str] = field(default_factory=dict)
    return_type: Optional[str] = None


_TAG_RE = re.compile(r"@(var|param|return)\s+([^\s]+)(?:\s+\$?([A-Za-z_][A-Za-z0-9_]*))?")


def normalize_type(raw: str) -> str:
    t = raw.strip().lstrip("\\").lstrip("?")
    if "|" in t:
        t = t.split("|", 1)[0]
    if t.endswith("[]"):
        return "array"
    low = t.lower()
    if low in SCALAR_TYPES:
        return _TYPE_NORMALIZE.get(low, low)
    return t


def parse_doc(doc: Optional[str]) -> DocInfo:
    info = DocInfo()
    if not doc:
        return info
    body = doc
    if body.startswith("/**"):
        body = body[3:]
    if body.endswith("*/"):
        body = body[:-2]
    lines = [re.sub(r"^\s*\*\s?", "", ln) for ln in body.splitlines()]
    summary_lines = [ln for ln in lines if ln.strip() and not ln.strip().startswith("@")]
    info.summary = " ".join(ln.strip() for ln in summary_lines)
    for m in _TAG_RE.finditer("\n".join(lines)):
        tag, type_raw, name = m.group(1), m.group(2), m.group(3)
        norm = normalize_type(type_raw)
        if tag == "var":
            info.var_type = norm
        elif tag == "return":
            info.return_type = norm
        elif tag == "param" and name:
            info.param_types[name] = norm
    return info
