"""SMT-LIB dumps of per-flow string constraints.

One ``path_NNNN.smt2`` per reported flow, written in QF_S with the
``str.indexof`` / ``str.contains`` / ``str.in_re`` / ``str.to_lower`` /
``re.from_ecma2020`` vocabulary, so the pruning question can be replayed
against an external solver.  Output is deterministic: variables are
numbered by sorted reference spelling and assertions are sorted.
"""
from __future__ import annotations

import os
from typing import Optional

from .conditions import PathCondition, Ref
from .translate import StringConstraint, translate_condition

_REQUEST_URL_ECMA = (
    "^[a-z][a-z0-9+.-]*://[a-z0-9-]+(\\.[a-z0-9-]+)+(:[0-9]+)?(/.*)?$")

KIND_FILE = "file_url"
KIND_REQUEST = "request_url"


def _url_assert(sym: str, kinds: tuple[str, ...]) -> str:
    request = (f"(str.in_re {sym} "
               f"(re.from_ecma2020 \"{_REQUEST_URL_ECMA}\"))")
    fileish = (f"(or (str.contains {sym} \"/\") "
               f"(str.prefixof \"file://\" {sym}))")
    clauses = []
    if KIND_REQUEST in kinds:
        clauses.append(request)
    if KIND_FILE in kinds:
        clauses.append(fileish)
    if not clauses:
        return ""
    body = clauses[0] if len(clauses) == 1 else f"(or {' '.join(clauses)})"
    return f"(assert {body})"


def _translate_all(conditions: list[PathCondition]
                   ) -> tuple[list[StringConstraint],
                              list[list[list[StringConstraint]]]]:
    """(flat constraints, one arm-list per disjunctive condition)."""
    flat: list[StringConstraint] = []
    disjunctions: list[list[list[StringConstraint]]] = []
    for cond in conditions:
        if cond.alternatives:
            arms = []
            for alt in cond.alternatives:
                parts = [c for sub in alt if not sub.alternatives
                         and (c := translate_condition(sub)) is not None]
                if parts:
                    arms.append(parts)
            if arms:
                disjunctions.append(arms)
            continue
        constraint = translate_condition(cond)
        if constraint is not None:
            flat.append(constraint)
    return flat, disjunctions


def emit_path(out_dir: str, index: int, conditions: list[PathCondition],
              sink_ref: Optional[Ref], kinds: tuple[str, ...]) -> str:
    os.makedirs(out_dir, exist_ok=True)
    flat, disjunctions = _translate_all(conditions)

    refs: set[Ref] = {c.var for c in flat}
    for arms in disjunctions:
        for parts in arms:
            refs.update(c.var for c in parts)
    if sink_ref is not None:
        refs.add(sink_ref)
    ordered = sorted(refs, key=repr)
    syms = {ref: f"s{i}" for i, ref in enumerate(ordered)}

    def render(constraint: StringConstraint) -> str:
        return constraint.smt.format(s=syms[constraint.var])

    asserts = sorted(f"(assert {render(c)})" for c in flat)
    rendered_disjunctions = []
    for arms in disjunctions:
        arm_bodies = []
        for parts in arms:
            bodies = [render(c) for c in parts]
            arm_bodies.append(bodies[0] if len(bodies) == 1
                              else f"(and {' '.join(bodies)})")
        body = arm_bodies[0] if len(arm_bodies) == 1 \
            else f"(or {' '.join(arm_bodies)})"
        rendered_disjunctions.append(f"(assert {body})")
    asserts += sorted(rendered_disjunctions)
    if sink_ref is not None:
        url = _url_assert(syms[sink_ref], kinds)
        if url:
            asserts.append(url)

    lines = [f"; flow {index}", "(set-logic QF_S)"]
    for ref in ordered:
        lines.append(f"(declare-const {syms[ref]} String)  ; {ref!r}")
    lines.extend(asserts)
    lines.append("(check-sat)")
    path = os.path.join(out_dir, f"path_{index:04d}.smt2")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    return path
