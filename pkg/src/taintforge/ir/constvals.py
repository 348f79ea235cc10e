"""Per-function constant-value tracking over SSA values.

Resolves which SSA values hold statically known constants: literal copies,
folded string concatenation, phi nodes whose inputs agree, and array literals
with fully known elements.  Used for callable-name rewriting, sink option
arguments, and concatenation prefix analysis.
"""
from __future__ import annotations

from typing import Optional

from .ssa import (
    ArrayInit, Assign, Binary, CastStmt, Cfg, Const, Operand, Phi, Unary, Value,
)

_UNKNOWN = object()


class ConstMap:
    """value id -> known constant (absent means unknown)."""

    def __init__(self, values: dict[int, object],
                 prefixes: Optional[dict[int, str]] = None) -> None:
        self._values = values
        self._prefixes = prefixes or {}

    def known(self, vid: int) -> bool:
        return vid in self._values

    def get(self, vid: int) -> object:
        return self._values[vid]

    def of_operand(self, op: Operand) -> object:
        """The constant an operand carries, or the _UNKNOWN sentinel."""
        if isinstance(op, Const):
            return op.value
        if isinstance(op, Value) and op.id in self._values:
            return self._values[op.id]
        return _UNKNOWN

    def operand_known(self, op: Operand) -> bool:
        return self.of_operand(op) is not _UNKNOWN

    def string_of(self, op: Operand) -> Optional[str]:
        val = self.of_operand(op)
        return val if isinstance(val, str) else None

    def string_prefix_of(self, op: Operand) -> Optional[str]:
        """Known leading text of a string value.

        A fully known constant is its own prefix; concatenations whose left
        part is known but whose right part is not still pin the start of
        the result.
        """
        full = self.string_of(op)
        if full is not None:
            return full
        if isinstance(op, Value):
            return self._prefixes.get(op.id)
        return None


def unknown_sentinel() -> object:
    return _UNKNOWN


def compute_consts(cfg: Cfg, max_passes: int = 5) -> ConstMap:
    values: dict[int, object] = {}
    prefixes: dict[int, str] = {}

    def op_val(op: Operand) -> object:
        if isinstance(op, Const):
            return op.value
        if isinstance(op, Value):
            return values.get(op.id, _UNKNOWN)
        return _UNKNOWN

    def op_prefix(op: Operand) -> Optional[str]:
        val = op_val(op)
        if isinstance(val, str):
            return val
        if isinstance(op, Value):
            return prefixes.get(op.id)
        return None

    for _ in range(max_passes):
        changed = False

        def record(vid: int, val: object) -> None:
            nonlocal changed
            if val is _UNKNOWN:
                return
            if vid not in values or values[vid] != val:
                values[vid] = val
                changed = True

        for block in cfg.blocks:
            for stmt in block.stmts:
                if isinstance(stmt, Assign):
                    record(stmt.dst, op_val(stmt.src))
                elif isinstance(stmt, Binary) and stmt.op == ".":
                    left, right = op_val(stmt.left), op_val(stmt.right)
                    if left is not _UNKNOWN and right is not _UNKNOWN:
                        record(stmt.dst, _as_str(left) + _as_str(right))
                    else:
                        lead = op_prefix(stmt.left)
                        if lead and stmt.dst not in values \
                                and prefixes.get(stmt.dst) != lead:
                            prefixes[stmt.dst] = lead
                            changed = True
                elif isinstance(stmt, Unary) and stmt.op == "-":
                    val = op_val(stmt.src)
                    if isinstance(val, (int, float)) and not isinstance(val, bool):
                        record(stmt.dst, -val)
                elif isinstance(stmt, Unary) and stmt.op == "!":
                    val = op_val(stmt.src)
                    if val is not _UNKNOWN:
                        record(stmt.dst, not _truthy(val))
                elif isinstance(stmt, CastStmt):
                    val = op_val(stmt.src)
                    if val is not _UNKNOWN:
                        cast = _fold_cast(stmt.type, val)
                        if cast is not _UNKNOWN:
                            record(stmt.dst, cast)
                elif isinstance(stmt, Phi):
                    vals = [op_val(s) for s in stmt.sources]
                    if vals and all(v is not _UNKNOWN for v in vals) \
                            and all(v == vals[0] for v in vals[1:]):
                        record(stmt.dst, vals[0])
                elif isinstance(stmt, ArrayInit):
                    elems = []
                    ok = True
                    for key, value in stmt.elems:
                        kv = op_val(key) if key is not None else None
                        vv = op_val(value)
                        if vv is _UNKNOWN or (key is not None and kv is _UNKNOWN):
                            ok = False
                            break
                        elems.append((kv, vv))
                    if ok:
                        record(stmt.dst, tuple(elems))
        if not changed:
            break
    return ConstMap(values, prefixes)


def _as_str(val: object) -> str:
    if isinstance(val, bool):
        return "1" if val else ""
    if val is None:
        return ""
    if isinstance(val, float) and val == int(val):
        return str(int(val))
    return str(val)


def _truthy(val: object) -> bool:
    if isinstance(val, str):
        return val not in ("", "0")
    if isinstance(val, tuple):
        return len(val) > 0
    return bool(val)


def _fold_cast(kind: str, val: object) -> object:
    try:
        if kind == "int":
            if isinstance(val, str):
                digits = ""
                for ch in val.strip():
                    if ch.isdigit() or (ch == "-" and not digits):
                        digits += ch
                    else:
                        break
                return int(digits) if digits and digits != "-" else 0
            return int(val) if val is not None else 0
        if kind == "float":
            return float(val) if isinstance(val, (int, float)) else _UNKNOWN
        if kind == "bool":
            return _truthy(val)
        if kind == "string":
            return _as_str(val) if not isinstance(val, tuple) else _UNKNOWN
    except (TypeError, ValueError):
        return _UNKNOWN
    return _UNKNOWN
