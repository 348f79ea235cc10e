"""Third-party source/sink candidate harvesting.

Candidates are public functions and methods that carry a doc comment;
anything undocumented is assumed not to be part of a deliberate API surface.
Source candidates additionally need a return type that can plausibly carry
request data (so `void`/`int`/`float`/`bool` returns are dropped).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from ..frontend.project import FunctionInfo, Project

_NON_DATA_RETURNS = {"void", "int", "float", "bool"}


@dataclass(frozen=True)
class CandidateFunction:
    signature: str              # \class::method or \function, lowercased
    doc_comment: str
    return_type: Optional[str]
    is_public: bool
    source_eligible: bool
    url_param_index: int = 0    # default position if classified as a sink


def _clean_doc(doc: str) -> str:
    """Strip comment markers, keep the text and tags on one line each."""
    lines = []
    for raw in doc.splitlines():
        line = raw.strip()
        for prefix in ("/**", "*/", "*"):
            if line.startswith(prefix):
                line = line[len(prefix):].strip()
        if line.endswith("*/"):
            line = line[:-2].strip()
        if line:
            lines.append(line)
    return " ".join(lines)


def _signature(fn: FunctionInfo) -> str:
    return "\\" + fn.qualified


def candidate_from(fn: FunctionInfo) -> Optional[CandidateFunction]:
    if fn.visibility != "public":
        return None
    if not fn.doc:
        return None
    doc = _clean_doc(fn.doc)
    if not doc:
        return None
    ret = fn.doc_return
    return CandidateFunction(
        signature=_signature(fn),
        doc_comment=doc,
        return_type=ret,
        is_public=True,
        source_eligible=ret is None or ret.lower() not in _NON_DATA_RETURNS,
    )


def harvest_candidates(project: Project) -> list[CandidateFunction]:
    out: list[CandidateFunction] = []
    seen: set[str] = set()
    for fn in project.all_functions():
        if fn.qualified.startswith("<main>"):
            continue
        cand = candidate_from(fn)
        if cand is not None and cand.signature not in seen:
            seen.add(cand.signature)
            out.append(cand)
    out.sort(key=lambda c: c.signature)
    return out
