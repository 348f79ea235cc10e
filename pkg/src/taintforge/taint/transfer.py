"""Per-operation taint transfer helpers.

These are pure functions over :mod:`taintforge.taint.lattice` values; the
interprocedural engine resolves operands (constants, aliases, key types)
and calls in here for the actual lattice arithmetic.

The request-URL channel gets special treatment on string concatenation:
a constant left-hand side that already pins a full authority component
(scheme, host and a path/query/fragment delimiter) neutralises whatever is
appended, while a bare scheme or an unterminated authority prefix leaves
the appended part in control of the host and keeps its taint.  The
file-URL channel requires full attacker control, so concatenating any
constant text on either side clears it.
"""
from __future__ import annotations

import re
from typing import Optional, Union

from .lattice import (
    CLEAN,
    MU,
    PARTIAL,
    SAFE,
    TAU,
    SymKey,
    TaintTriplet,
    VarTaint,
    from_elements,
    join_taint,
    join_taints,
    join_triplet,
    scalar_triplet,
)

# Constant prefix that already fixes scheme, a non-empty authority, and a
# delimiter that ends the authority: appended text can only influence
# path/query/fragment.  A bare scheme ("http://") or an unterminated
# authority ("http://a") does NOT match: appended text still shapes the
# host there.
_FULL_AUTHORITY_RE = re.compile(r"^[a-z][a-z0-9+.\-]*://[^/?#]+[/?#]", re.I)

# Conversions that force a numeric/boolean value and therefore drop taint.
SANITIZING_CALLS = {"intval", "floatval", "boolval"}
# basename() strips directory components: useless for forging a request
# URL, but the result still names a (single-segment) file.
REQUEST_SANITIZING_CALLS = {"basename"}

_CAST_KEEPS = {"string", "binary", "array", "object"}


def elem_state(t: TaintTriplet) -> int:
    """Flatten a value triplet to the {tau, mu} element domain."""
    if t.self_t in (TAU, PARTIAL) or t.any_element_tainted():
        return TAU
    return MU


def _scalarize(t: TaintTriplet) -> int:
    # String conversion of a value: whole-value taint decides.
    return TAU if t.self_t == TAU else MU


def concat_taint(left: VarTaint, right: VarTaint,
                 left_const: Optional[str], right_const: Optional[str],
                 left_prefix: Optional[str] = None,
                 safety_strings: bool = True) -> tuple[TaintTriplet, TaintTriplet]:
    """Taint of ``left . right`` as (file-channel, request-channel).

    ``left_const``/``right_const`` are exact known values; ``left_prefix``
    is the known leading text of the left part (equal to ``left_const``
    when that is known, possibly longer-lived through concat chains).
    """
    if left_const == "":
        return right.tf, right.tr
    if right_const == "":
        return left.tf, left.tr
    if left_prefix is None:
        left_prefix = left_const

    # file-URL channel: only full control taints, so both parts must be
    # tainted (a constant part is never tainted).
    if _scalarize(left.tf) == TAU and _scalarize(right.tf) == TAU:
        tf = scalar_triplet(TAU)
    else:
        tf = SAFE

    if not safety_strings:
        tr = join_triplet(scalar_triplet(_scalarize(left.tr)),
                          scalar_triplet(_scalarize(right.tr)))
        return tf, tr

    if _scalarize(left.tr) == TAU:
        # tainted prefix: the attacker already owns the start of the URL
        tr = scalar_triplet(TAU)
    elif left_prefix is not None and _FULL_AUTHORITY_RE.match(left_prefix):
        tr = SAFE
    else:
        # bare scheme, open authority, or arbitrary safe text: whatever is
        # appended can still steer the host, so the right side decides
        tr = scalar_triplet(_scalarize(right.tr))
    return tf, tr


def cast_taint(cast_type: str, src: VarTaint) -> VarTaint:
    if cast_type.lower() in _CAST_KEEPS:
        return src
    return CLEAN


def unary_taint(src: VarTaint) -> VarTaint:
    return src


def binary_taint(op: str, left: VarTaint, right: VarTaint,
                 left_const: Optional[str], right_const: Optional[str],
                 left_prefix: Optional[str] = None,
                 safety_strings: bool = True) -> VarTaint:
    if op == ".":
        tf, tr = concat_taint(left, right, left_const, right_const,
                              left_prefix, safety_strings)
        prov_f = (left.prov_f or right.prov_f) if tf != SAFE else None
        prov_r = (left.prov_r if _scalarize(left.tr) == TAU else None)
        if prov_r is None and tr != SAFE:
            prov_r = right.prov_r or left.prov_r
        return VarTaint(tf, tr, prov_f, prov_r)
    return join_taint(left, right)


def api_call_taint(args: list[VarTaint]) -> VarTaint:
    """Unknown external call: result merges whatever flowed in."""
    return join_taints(args)


ArrayEntry = tuple[Optional[Union[str, int, SymKey]], VarTaint]


def _next_append_key(s_map) -> int:
    ints = [k for k in s_map if isinstance(k, int)]
    return max(ints) + 1 if ints else 0


def _insert(s_map, r_map, key, state, arr_name: str) -> None:
    if key is None:
        # appends: positions are not observable statically, so a slot with
        # the same state subsumes the push — this keeps repeated pushes
        # (loops, reanalysis rounds) from growing the map without bound
        if r_map:
            mk = SymKey(f"max({arr_name})+1", "int")
            r_map[mk] = max(r_map.get(mk, state), state)
        else:
            if any(isinstance(k, int) and v == state
                   for k, v in s_map.items()):
                return
            s_map[_next_append_key(s_map)] = state
    elif isinstance(key, SymKey):
        r_map[key] = state
    else:
        s_map[key] = state


def array_literal_taint(entries: list[ArrayEntry],
                        arr_name: str = "") -> VarTaint:
    s_f: dict = {}
    r_f: dict = {}
    s_r: dict = {}
    r_r: dict = {}
    prov_f = prov_r = None
    for key, vt in entries:
        _insert(s_f, r_f, key, elem_state(vt.tf), arr_name)
        _insert(s_r, r_r, key, elem_state(vt.tr), arr_name)
        prov_f = prov_f or (vt.prov_f if elem_state(vt.tf) == TAU else None)
        prov_r = prov_r or (vt.prov_r if elem_state(vt.tr) == TAU else None)
    return VarTaint(from_elements(s_f, r_f), from_elements(s_r, r_r),
                    prov_f, prov_r)


def _elem_assign_channel(base: TaintTriplet, key, state: int,
                         arr_name: str) -> TaintTriplet:
    if base.is_scalar and base.self_t == TAU:
        # A wholesale-tainted array (e.g. a request-array copy) stays
        # tainted: single-slot overwrites are not tracked against it.
        return base
    s_map = base.s_map()
    r_map = base.r_map()
    _insert(s_map, r_map, key, state, arr_name)
    return from_elements(s_map, r_map)


def elem_assign_taint(base: VarTaint, key, value: VarTaint,
                      arr_name: str = "") -> VarTaint:
    tf = _elem_assign_channel(base.tf, key, elem_state(value.tf), arr_name)
    tr = _elem_assign_channel(base.tr, key, elem_state(value.tr), arr_name)
    prov_f = base.prov_f or (value.prov_f if elem_state(value.tf) == TAU else None)
    prov_r = base.prov_r or (value.prov_r if elem_state(value.tr) == TAU else None)
    return VarTaint(tf, tr, prov_f, prov_r)


def _elem_read_channel(base: TaintTriplet, key,
                       alias_names: frozenset[str]) -> int:
    if base.is_scalar or base.self_t in (TAU, MU):
        return base.self_t if base.self_t != PARTIAL else MU
    if isinstance(key, SymKey):
        for rec, state in base.arr_r:
            if rec.type == key.type and rec.name in alias_names:
                return state
    elif key is not None:
        for rec, state in base.arr_s:
            if rec == key:
                return state
    # no recorded slot matched: stay conservative if anything inside is hot
    return TAU if base.any_element_tainted() else MU


def elem_read_taint(base: VarTaint, key,
                    alias_names: frozenset[str] = frozenset()) -> VarTaint:
    if isinstance(key, SymKey):
        alias_names = alias_names | {key.name}
    f_state = _elem_read_channel(base.tf, key, alias_names)
    r_state = _elem_read_channel(base.tr, key, alias_names)
    return VarTaint(
        scalar_triplet(TAU) if f_state == TAU else SAFE,
        scalar_triplet(TAU) if r_state == TAU else SAFE,
        base.prov_f if f_state == TAU else None,
        base.prov_r if r_state == TAU else None,
    )


def _foreach_channel(arr: TaintTriplet, body_branches: bool) -> int:
    if arr.self_t == TAU:
        return TAU
    if arr.self_t == PARTIAL and not body_branches:
        return TAU
    return MU


def foreach_value_taint(arr: VarTaint, body_branches: bool) -> VarTaint:
    f_state = _foreach_channel(arr.tf, body_branches)
    r_state = _foreach_channel(arr.tr, body_branches)
    return VarTaint(
        scalar_triplet(TAU) if f_state == TAU else SAFE,
        scalar_triplet(TAU) if r_state == TAU else SAFE,
        arr.prov_f if f_state == TAU else None,
        arr.prov_r if r_state == TAU else None,
    )


def magic_args_taint(actuals: list[VarTaint]) -> VarTaint:
    """Packed-argument array handed to an interception method."""
    return array_literal_taint([(i, vt) for i, vt in enumerate(actuals)])
