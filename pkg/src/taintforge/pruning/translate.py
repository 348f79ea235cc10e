"""Turning path conditions into string constraints.

Each translatable condition becomes a :class:`StringConstraint`: a Python
predicate the bounded checker evaluates directly, plus an SMT-LIB rendering
for ``--emit-smt``.  Conditions we cannot express (opaque state, unexpanded
project checks, exotic regexes) translate to ``None`` and simply drop out
of the constraint set — dropping a conjunct can only grow the feasible set,
so it can never cause a wrong prune, only a kept flow.

PHP quirks that matter here and are modelled deliberately:

* ``strpos`` returns ``false`` when absent and ``0`` at a match at the
  start, and ``0`` is falsy — so a bare ``if (strpos(...))`` requires the
  needle at position >= 1, while ``== false`` admits both "absent" and
  "at position 0".
* ``empty($s)`` is true for ``""`` and ``"0"``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Optional

from .conditions import (
    Compare, ConstRef, Empty, FuncCheck, ListRef, PathCondition,
    REQUIRED_TRUE, Ref, TaintRef, FormalRef,
)


class RegexUnsupported(Exception):
    """Pattern uses features outside the supported subset."""


@dataclass(frozen=True)
class StringConstraint:
    var: Ref                            # the string variable constrained
    smt: str                            # SMT-LIB body with {s} placeholder
    origin: PathCondition
    needles: tuple[str, ...] = ()       # literals worth trying as embeds
    members: tuple[str, ...] = ()       # allowlist: var must be one of these
    pred: Callable[[str], bool] = field(default=lambda s: True, compare=False)

    def holds(self, s: str) -> bool:
        return self.pred(s)


def _sc(var, smt, origin, pred, needles=(), members=()):
    return StringConstraint(var, smt, origin, tuple(needles), tuple(members),
                            pred)


def _q(text: str) -> str:
    """SMT-LIB string literal; control and non-ASCII bytes as \\u{...}."""
    out = []
    for ch in text:
        if ch == '"':
            out.append('""')
        elif 0x20 <= ord(ch) < 0x7F:
            out.append(ch)
        else:
            out.append(f"\\u{{{ord(ch):x}}}")
    return '"' + "".join(out) + '"'


def _num(n: int) -> str:
    return str(n) if n >= 0 else f"(- {-n})"


# ---- the regex subset ---------------------------------------------------
#
# Accepted: literal characters, escaped literals, character classes with
# ranges and negation, '.', anchors, alternation, plain groups, and the
# *, +, ? quantifiers.  Everything else raises RegexUnsupported, which the
# caller turns into "keep".

_CLASS_RE = re.compile(r"\[\^?\]?(?:[^\]\\]|\\.)*\]")


def _validate_regex_body(body: str) -> None:
    i, n = 0, len(body)
    while i < n:
        ch = body[i]
        if ch == "\\":
            if i + 1 >= n:
                raise RegexUnsupported("trailing backslash")
            if body[i + 1].isalnum() and body[i + 1] not in "dDwWsS":
                raise RegexUnsupported(f"escape \\{body[i + 1]}")
            i += 2
            continue
        if ch == "[":
            m = _CLASS_RE.match(body, i)
            if not m:
                raise RegexUnsupported("unterminated class")
            i = m.end()
            continue
        if ch == "{":
            raise RegexUnsupported("counted repetition")
        if ch == "(":
            if body.startswith("(?", i):
                raise RegexUnsupported("special group")
            i += 1
            continue
        if ch in "*+?" and i + 1 < n and body[i + 1] == "?":
            raise RegexUnsupported("lazy quantifier")
        i += 1


def regex_predicate(pattern: str) -> tuple[Callable[[str], bool], str]:
    """Compile a PHP ``preg_*`` pattern from the supported subset.

    Returns (search predicate, pattern body for the SMT rendering).
    """
    if len(pattern) < 2:
        raise RegexUnsupported("no delimiters")
    delim = pattern[0]
    if delim.isalnum() or delim == "\\":
        raise RegexUnsupported("bad delimiter")
    close = {"(": ")", "[": "]", "{": "}", "<": ">"}.get(delim, delim)
    end = pattern.rfind(close)
    if end <= 0:
        raise RegexUnsupported("no closing delimiter")
    body, flags = pattern[1:end], pattern[end + 1:]
    if any(f not in "i" for f in flags):
        raise RegexUnsupported(f"flags {flags!r}")
    _validate_regex_body(body)
    try:
        rx = re.compile(body, re.IGNORECASE if "i" in flags else 0)
    except re.error as exc:
        raise RegexUnsupported(str(exc)) from exc
    return (lambda s: rx.search(s) is not None), body


def _regex_literals(body: str) -> list[str]:
    """Literal runs inside a pattern; used to seed checker candidates."""
    runs, current = [], []
    i = 0
    while i < len(body):
        ch = body[i]
        if ch == "\\" and i + 1 < len(body) and not body[i + 1].isalnum():
            current.append(body[i + 1])
            i += 2
            continue
        if ch.isalnum() or ch in "._-:/":
            if ch == ".":       # metacharacter, not a literal dot
                if current:
                    runs.append("".join(current))
                current = []
                i += 1
                continue
            current.append(ch)
            i += 1
            continue
        if current:
            runs.append("".join(current))
        current = []
        i += 1
    if current:
        runs.append("".join(current))
    return [r for r in runs if r]


# ---- per-check translations ---------------------------------------------

def _position_sets(rel: Optional[tuple[str, object]],
                   required: bool) -> Optional[str]:
    """Reduce a strpos comparison to one of: 'present', 'absent',
    'at>=1', 'absent-or-0', 'at==K', 'at!=K' (K via closure below)."""
    if rel is None:
        return "at>=1" if required else "absent-or-0"
    op, const = rel
    if isinstance(const, bool):
        if const is False:
            # strict comparison pins "absent" exactly; the loose one also
            # matches a hit at position 0 because 0 == false in PHP
            if op in ("===", "=="):
                want = "absent" if op == "===" else "absent-or-0"
                other = "present" if op == "===" else "at>=1"
            else:  # !== / !=
                want = "present" if op == "!==" else "at>=1"
                other = "absent" if op == "!==" else "absent-or-0"
            return want if required else other
        # compared against true: strpos never returns true
        return None
    if isinstance(const, int) and not isinstance(const, bool):
        if op in ("==", "==="):
            return f"at=={const}" if required else f"at!={const}"
        if op in ("!=", "!=="):
            return f"at!={const}" if required else f"at=={const}"
    return None


def _indexof_constraint(var, needle, rel, required, origin, lowered):
    shape = _position_sets(rel, required)
    if shape is None or needle == "":
        return None
    find = needle.lower() if lowered else needle

    def index_of(s: str) -> int:
        hay = s.lower() if lowered else s
        return hay.find(find)

    subject = f"(str.to_lower {{s}})" if lowered else "{s}"
    base = f"(str.indexof {subject} {_q(find)} 0)"
    if shape == "present":
        pred = lambda s: index_of(s) >= 0
        smt = f"(>= {base} 0)"
    elif shape == "absent":
        pred = lambda s: index_of(s) < 0
        smt = f"(= {base} {_num(-1)})"
    elif shape == "at>=1":
        pred = lambda s: index_of(s) >= 1
        smt = f"(>= {base} 1)"
    elif shape == "absent-or-0":
        pred = lambda s: index_of(s) <= 0
        smt = f"(<= {base} 0)"
    elif shape.startswith("at=="):
        k = int(shape[4:])
        pred = lambda s: index_of(s) == k
        smt = f"(= {base} {_num(k)})"
    else:
        k = int(shape[4:])
        pred = lambda s: index_of(s) != k
        smt = f"(not (= {base} {_num(k)}))"
    return _sc(var, smt, origin, pred, needles=[needle])


def _contains_constraint(var, needle, rel, required, origin, lowered):
    if needle == "":
        return None
    want: Optional[bool]
    if rel is None:
        want = required
    else:
        op, const = rel
        if not isinstance(const, bool):
            return None
        positive = (const is True) == (op in ("==", "==="))
        want = positive if required else not positive
    find = needle.lower() if lowered else needle

    def contains(s: str) -> bool:
        hay = s.lower() if lowered else s
        return find in hay

    subject = f"(str.to_lower {{s}})" if lowered else "{s}"
    smt = f"(str.contains {subject} {_q(find)})"
    if want:
        return _sc(var, smt, origin, contains, needles=[needle])
    return _sc(var, f"(not {smt})", origin, lambda s: not contains(s),
               needles=[needle])


def _regex_constraint(var, pattern, rel, required, origin):
    try:
        search, body = regex_predicate(pattern)
    except RegexUnsupported:
        return None
    want: Optional[bool]
    if rel is None:
        want = required
    else:
        op, const = rel
        if isinstance(const, bool):
            positive = (const is True) == (op in ("==", "==="))
        elif isinstance(const, int):
            positive = (const != 0) == (op in ("==", "==="))
        else:
            return None
        want = positive if required else not positive
    smt = f"(str.in_re {{s}} (re.from_ecma2020 {_q(body)}))"
    if want:
        return _sc(var, smt, origin, search, needles=_regex_literals(body))
    return _sc(var, f"(not {smt})", origin, lambda s: not search(s),
               needles=_regex_literals(body))


def _membership_constraint(var, members, required, origin):
    strings = tuple(m for m in members if isinstance(m, str))
    if len(strings) != len(members) or not strings:
        return None
    disjuncts = " ".join(f"(= {{s}} {_q(m)})" for m in strings)
    smt = f"(or {disjuncts})" if len(strings) > 1 \
        else f"(= {{s}} {_q(strings[0])})"
    member_set = frozenset(strings)
    if required:
        return _sc(var, smt, origin, lambda s: s in member_set,
                   needles=strings, members=strings)
    return _sc(var, f"(not {smt})", origin, lambda s: s not in member_set,
               needles=strings)


_EMPTY_SET = frozenset({"", "0"})


def translate_condition(cond: PathCondition) -> Optional[StringConstraint]:
    """One condition to one constraint, or None if inexpressible."""
    required = cond.polarity == REQUIRED_TRUE
    atom = cond.atom
    if atom is None:
        return None                     # disjunctions are handled above us

    if isinstance(atom, Empty):
        var = atom.var
        if not isinstance(var, (TaintRef, FormalRef)):
            return None
        inner = f"(or (= {{s}} {_q('')}) (= {{s}} {_q('0')}))"
        if required:
            return _sc(var, inner, cond, lambda s: s in _EMPTY_SET)
        return _sc(var, f"(not {inner})", cond,
                   lambda s: s not in _EMPTY_SET)

    if isinstance(atom, Compare):
        var = atom.var
        if not isinstance(var, (TaintRef, FormalRef)):
            return None
        if not isinstance(atom.const, str):
            return None
        const = atom.const
        equal = atom.op in ("==", "===")
        want_equal = equal == required
        smt = f"(= {{s}} {_q(const)})"
        if want_equal:
            return _sc(var, smt, cond, lambda s: s == const,
                       needles=[const], members=[const])
        return _sc(var, f"(not {smt})", cond, lambda s: s != const,
                   needles=[const])

    if isinstance(atom, FuncCheck):
        return _translate_check(atom, cond, required)
    return None


def _translate_check(atom: FuncCheck, cond: PathCondition,
                     required: bool) -> Optional[StringConstraint]:
    name, args, rel = atom.name, atom.args, atom.rel
    if atom.user:
        return None

    def const_str(ref: Ref) -> Optional[str]:
        if isinstance(ref, ConstRef) and isinstance(ref.value, str):
            return ref.value
        return None

    def str_var(ref: Ref) -> Optional[Ref]:
        if isinstance(ref, (TaintRef, FormalRef)):
            return ref
        return None

    if name in ("strpos", "stripos") and len(args) >= 2:
        var, needle = str_var(args[0]), const_str(args[1])
        if var is None or needle is None:
            return None
        return _indexof_constraint(var, needle, rel, required, cond,
                                   lowered=name == "stripos")
    if name in ("strstr", "stristr") and len(args) >= 2:
        var, needle = str_var(args[0]), const_str(args[1])
        if var is None or needle is None:
            return None
        return _contains_constraint(var, needle, rel, required, cond,
                                    lowered=name == "stristr")
    if name in ("preg_match", "preg_match_all") and len(args) >= 2:
        pattern, var = const_str(args[0]), str_var(args[1])
        if var is None or pattern is None:
            return None
        return _regex_constraint(var, pattern, rel, required, cond)
    if name == "in_array" and len(args) >= 2:
        var = str_var(args[0])
        if var is None or not isinstance(args[1], ListRef):
            return None
        want = _want_bool(rel, required)
        if want is None:
            return None
        return _membership_constraint(var, args[1].values, want, cond)
    if name == "array_key_exists" and len(args) >= 2:
        var = str_var(args[0])
        if var is None or not isinstance(args[1], ListRef):
            return None
        want = _want_bool(rel, required)
        if want is None or not args[1].keys:
            return None
        return _membership_constraint(var, args[1].keys, want, cond)
    return None


def _want_bool(rel: Optional[tuple[str, object]],
               required: bool) -> Optional[bool]:
    if rel is None:
        return required
    op, const = rel
    if not isinstance(const, bool):
        return None
    positive = (const is True) == (op in ("==", "==="))
    return positive if required else not positive
