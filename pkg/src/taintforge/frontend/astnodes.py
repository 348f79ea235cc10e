"""AST node vocabulary for the PHP subset.

Every node carries a byte-accurate source span so later stages (and reports)
can point back into the original file.  The tree is deliberately uniform: one
``AstNode`` dataclass, a ``kind`` tag drawn from :class:`Kind`, and role-labelled
children.  Leaves keep their literal source spelling in ``text`` and a decoded
semantic value (variable name, string contents, numeric value) in ``value``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterator, Optional


class Kind:
    """Node kind tags.

    CONST_INT doubles as the tag for numeric literals with a fractional part
    (the decoded float lives in ``value``).  BREAK/CONTINUE extend the core set
    so loop control can lower to explicit jumps instead of opaque statements.
    """

    ASSIGN = "ASSIGN"
    VAR = "VAR"
    CONST_STRING = "CONST_STRING"
    CONST_INT = "CONST_INT"
    CONST_BOOL = "CONST_BOOL"
    CONST_NULL = "CONST_NULL"
    UNARY_OP = "UNARY_OP"
    BINARY_OP = "BINARY_OP"
    CAST = "CAST"
    CALL = "CALL"
    METHOD_CALL = "METHOD_CALL"
    STATIC_CALL = "STATIC_CALL"
    NEW = "NEW"
    ARG_LIST = "ARG_LIST"
    NAME = "NAME"
    DIM = "DIM"
    ARRAY = "ARRAY"
    ARRAY_ELEM = "ARRAY_ELEM"
    FOREACH = "FOREACH"
    IF = "IF"
    IF_ELEM = "IF_ELEM"
    WHILE = "WHILE"
    FOR = "FOR"
    SWITCH = "SWITCH"
    TERNARY = "TERNARY"
    RETURN = "RETURN"
    YIELD = "YIELD"
    THROW = "THROW"
    FUNC_DECL = "FUNC_DECL"
    PARAM_LIST = "PARAM_LIST"
    PARAM = "PARAM"
    STMT_LIST = "STMT_LIST"
    CLASS_DECL = "CLASS_DECL"
    METHOD_DECL = "METHOD_DECL"
    PROP_DECL = "PROP_DECL"
    PROP_FETCH = "PROP_FETCH"
    STATIC_PROP_FETCH = "STATIC_PROP_FETCH"
    GLOBAL_STMT = "GLOBAL_STMT"
    ECHO = "ECHO"
    INTERPOLATED_STRING = "INTERPOLATED_STRING"
    OPAQUE_STMT = "OPAQUE_STMT"
    BREAK = "BREAK"
    CONTINUE = "CONTINUE"


#: Roles used by the shapes the analysis pattern-matches on.
ROLE_VAR = "var"
ROLE_EXPR = "expr"
ROLE_LEFT = "left"
ROLE_RIGHT = "right"
ROLE_COND = "cond"
ROLE_STMTS = "stmts"
ROLE_KEY = "key"
ROLE_VALUE = "value"
ROLE_DIM = "dim"
ROLE_ARGS = "args"
ROLE_NAME = "name"
ROLE_PARAMS = "params"
ROLE_FLAG = "flag"


@dataclass(frozen=True)
class Span:
    """Byte-accurate location: (file_id, line, column, start, end).

    ``line`` is 1-based, ``column`` 0-based, ``start``/``end`` byte offsets into
    the file's text with ``end`` exclusive.
    """

    file_id: int
    line: int
    col: int
    start: int
    end: int

    def covering(self, other: "Span") -> "Span":
        if other.start < self.start:
            line, col, start = other.line, other.col, other.start
        else:
            line, col, start = self.line, self.col, self.start
        return Span(self.file_id, line, col, start, max(self.end, other.end))

    def contains(self, other: "Span") -> bool:
        return self.start <= other.start and other.end <= self.end


@dataclass
class AstNode:
    kind: str
    span: Span
    children: list[tuple[Optional[str], "AstNode"]] = field(default_factory=list)
    text: Optional[str] = None
    value: Any = None
    attrs: dict[str, Any] = field(default_factory=dict)

    def child(self, role: str) -> Optional["AstNode"]:
        for r, node in self.children:
            if r == role:
                return node
        return None

    def all(self, role: str) -> list["AstNode"]:
        return [node for r, node in self.children if r == role]

    def add(self, role: Optional[str], node: Optional["AstNode"]) -> None:
        if node is not None:
            self.children.append((role, node))
            self.span = self.span.covering(node.span)

    def walk(self) -> Iterator["AstNode"]:
        yield self
        for _, node in self.children:
            yield from node.walk()

    def __repr__(self) -> str:  # keep pytest diffs readable
        bits = [self.kind]
        if self.text is not None:
            bits.append(repr(self.text))
        return f"<{' '.join(bits)} @{self.span.line}:{self.span.col}>"


def dump_sexpr(node: AstNode, indent: int = 0) -> str:
    """Render a node one-per-line, indented, kind first then role-labelled children."""
    pad = "  " * indent
    head = node.kind
    if node.text is not None and not node.children:
        head += f" {node.text!r}"
    lines = [pad + head]
    for role, child in node.children:
        label = f"{role}: " if role else ""
        sub = dump_sexpr(child, indent + 1)
        # splice the role label in front of the child's first line
        first, _, rest = sub.partition("\n")
        stripped = first.lstrip()
        lines.append("  " * (indent + 1) + label + stripped)
        if rest:
            lines.append(rest)
    return "\n".join(lines)
