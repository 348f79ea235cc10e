"""Deciding whether a flow's conditions admit any attack string.

Two pruning arguments are made, both requiring positive evidence:

* ``prune_always_unsat`` — the conditions contradict each other outright
  (a formal compared against a constant that the call site pins to a
  different constant, mutually exclusive comparisons, the same check
  required both true and false).
* ``prune_url_rejected`` — the conditions are mutually consistent but no
  string that satisfies them parses as a URL of the kind the sink accepts.

The URL argument is decided by bounded instantiation: a deterministic
candidate pool is built from URL templates with the conditions' own
constants embedded at scheme, host, and path positions, plus allowlist
members; if any candidate satisfies every constraint and the URL grammar,
the flow is feasible and kept.  Anything that prevents a definite answer —
opaque conditions were already dropped at translation, a budget or time
limit trips, too many expansion alternatives — results in "keep".
"""
from __future__ import annotations

import itertools
import logging
import re
from dataclasses import dataclass
from time import monotonic
from typing import Optional

from ..callgraph.graph import CallGraph
from ..frontend.project import Project
from ..ir.constvals import ConstMap
from ..ir.ssa import Cfg
from .conditions import (
    Compare, ConstRef, Empty, FuncCheck, ListRef, OpaqueCond, PathCondition,
    REQUIRED_TRUE, Ref, extract,
)
from .translate import (
    RegexUnsupported, StringConstraint, regex_predicate, translate_condition,
)
from . import smt

log = logging.getLogger(__name__)

KIND_FILE = "file_url"
KIND_REQUEST = "request_url"

_MAX_SELECTIONS = 16      # cap on alternative-combination fan-out
_MAX_CANDIDATE_LEN = 64


class CheckerTimeout(Exception):
    """The bounded checker ran out of time; the flow must be kept."""


@dataclass(frozen=True)
class PruneVerdict:
    action: str             # keep | prune_always_unsat | prune_url_rejected
    evidence: tuple[PathCondition, ...] = ()
    witness: Optional[str] = None


KEEP = PruneVerdict("keep")


@dataclass
class PrunedPath:
    path: object
    verdict: PruneVerdict
    conditions: list[PathCondition]


@dataclass
class KeptPath:
    path: object
    conditions: list[PathCondition]
    trail: tuple[str, ...]      # how each prune check was survived


@dataclass
class PruneOutcome:
    kept: list[KeptPath]
    pruned: list[PrunedPath]


# ---- outright contradictions --------------------------------------------

def _php_empty(value: object) -> bool:
    return value in ("", "0", 0, 0.0, False, None) or value == []


def _truthy(value: object) -> bool:
    if isinstance(value, str):
        return value not in ("", "0")
    return bool(value)


def _eval_ground_check(atom: FuncCheck) -> Optional[bool]:
    """Evaluate a check whose arguments are all constants."""
    vals = []
    for ref in atom.args:
        if isinstance(ref, ConstRef):
            vals.append(ref.value)
        elif isinstance(ref, ListRef):
            vals.append(ref)
        else:
            return None
    raw: object
    try:
        if atom.name in ("strpos", "stripos") and len(vals) >= 2:
            hay, needle = str(vals[0]), str(vals[1])
            if atom.name == "stripos":
                hay, needle = hay.lower(), needle.lower()
            pos = hay.find(needle)
            raw = False if pos < 0 else pos
        elif atom.name in ("strstr", "stristr") and len(vals) >= 2:
            hay, needle = str(vals[0]), str(vals[1])
            probe = (hay.lower(), needle.lower()) \
                if atom.name == "stristr" else (hay, needle)
            pos = probe[0].find(probe[1])
            raw = False if pos < 0 else hay[pos:]
        elif atom.name in ("preg_match", "preg_match_all") and len(vals) >= 2:
            search, _ = regex_predicate(str(vals[0]))
            raw = 1 if search(str(vals[1])) else 0
        elif atom.name == "in_array" and len(vals) >= 2 \
                and isinstance(vals[1], ListRef):
            raw = vals[0] in vals[1].values
        elif atom.name == "array_key_exists" and len(vals) >= 2 \
                and isinstance(vals[1], ListRef):
            raw = vals[0] in vals[1].keys
        else:
            return None
    except (RegexUnsupported, TypeError, ValueError):
        return None
    return _apply_rel(raw, atom.rel)


def _apply_rel(raw: object,
               rel: Optional[tuple[str, object]]) -> Optional[bool]:
    if rel is None:
        return _truthy(raw)
    op, const = rel
    if op in ("===", "!=="):
        same = type(raw) is type(const) and raw == const
        return same if op == "===" else not same
    if isinstance(const, bool):
        eq = _truthy(raw) == const
    elif isinstance(raw, bool):
        eq = raw == _truthy(const)
    elif type(raw) is type(const):
        eq = raw == const
    else:
        return None
    return eq if op == "==" else not eq


def _eval_ground(cond: PathCondition) -> Optional[bool]:
    """Truth value of a condition that references only constants."""
    atom = cond.atom
    result: Optional[bool] = None
    if isinstance(atom, Compare) and isinstance(atom.var, ConstRef):
        if atom.op in ("===", "!=="):
            same = type(atom.var.value) is type(atom.const) \
                and atom.var.value == atom.const
            result = same if atom.op == "===" else not same
        else:
            eq = atom.var.value == atom.const
            result = eq if atom.op == "==" else not eq
    elif isinstance(atom, Empty) and isinstance(atom.var, ConstRef):
        result = _php_empty(atom.var.value)
    elif isinstance(atom, FuncCheck) and not atom.user:
        result = _eval_ground_check(atom)
    if result is None:
        return None
    return result if cond.polarity == REQUIRED_TRUE else not result


def _flat_contradiction(conds: list[PathCondition]
                        ) -> Optional[tuple[PathCondition, ...]]:
    # a condition over constants that evaluates to "cannot hold"
    for cond in conds:
        if isinstance(cond.atom, OpaqueCond) or cond.atom is None:
            continue
        if _eval_ground(cond) is False:
            return (cond,)

    # mutually exclusive equality constraints on one variable
    by_var: dict[Ref, list[tuple[str, object, PathCondition]]] = {}
    for cond in conds:
        atom = cond.atom
        if not isinstance(atom, Compare) or isinstance(atom.var, ConstRef):
            continue
        equal = (atom.op in ("==", "===")) == \
            (cond.polarity == REQUIRED_TRUE)
        by_var.setdefault(atom.var, []).append(
            ("eq" if equal else "ne", atom.const, cond))
    for entries in by_var.values():
        eqs = [(c, cond) for mode, c, cond in entries if mode == "eq"]
        nes = [(c, cond) for mode, c, cond in entries if mode == "ne"]
        for (c1, cond1), (c2, cond2) in itertools.combinations(eqs, 2):
            if c1 != c2:
                return (cond1, cond2)
        for c1, cond1 in eqs:
            for c2, cond2 in nes:
                if c1 == c2:
                    return (cond1, cond2)

    # the same check required both ways
    by_atom: dict[object, dict[str, PathCondition]] = {}
    for cond in conds:
        if cond.atom is None or isinstance(cond.atom, OpaqueCond):
            continue
        slot = by_atom.setdefault(cond.atom, {})
        slot.setdefault(cond.polarity, cond)
        if len(slot) == 2:
            return tuple(slot.values())
    return None


def check_always_unsat(conditions: list[PathCondition]
                       ) -> Optional[tuple[PathCondition, ...]]:
    """Evidence that the conditions can never hold together, else None."""
    flat = [c for c in conditions if not c.alternatives]
    evidence = _flat_contradiction(flat)
    if evidence:
        return evidence
    for cond in conditions:
        if not cond.alternatives:
            continue
        gathered: list[PathCondition] = []
        for alt in cond.alternatives:
            ev = _flat_contradiction(
                flat + [a for a in alt if not a.alternatives])
            if ev is None:
                gathered = []
                break
            gathered.extend(ev)
        if gathered:
            ordered = dict.fromkeys(gathered + [cond])
            return tuple(ordered)
    return None


# ---- bounded URL-rejection check ----------------------------------------

_REQUEST_URL_RE = re.compile(
    r"^[a-z][a-z0-9+.\-]*://[a-z0-9\-]+(\.[a-z0-9\-]+)+(:[0-9]+)?(/.*)?$",
    re.S)


def valid_request_url(s: str) -> bool:
    return _REQUEST_URL_RE.match(s) is not None


def valid_file_url(s: str) -> bool:
    return "/" in s or s.startswith("file://")


def _url_ok(s: str, kind: Optional[str]) -> bool:
    if kind is None:
        return True
    if kind == KIND_REQUEST:
        return valid_request_url(s)
    return valid_file_url(s)


_HOST_CHARS = frozenset("abcdefghijklmnopqrstuvwxyz0123456789-")


def _host_safe(text: str) -> Optional[str]:
    cleaned = "".join(ch for ch in text.lower() if ch in _HOST_CHARS)
    return cleaned or None


def _candidates(needles: list[str], members: list[str]) -> list[str]:
    out: list[str] = list(members)
    out += ["", "a", "0"]
    schemes = ("http://", "s://", "ftp://")
    for scheme in schemes:
        for host in ("a.b", "evil.test"):
            for tail in ("", "/", "/x"):
                out.append(scheme + host + tail)
    out += ["file:///x", "file://a.b/x", "/x", "/etc/x", "a/b", "a.b/c",
            "x.y", "a.b"]
    short = [n for n in dict.fromkeys(needles) if 0 < len(n) <= 48][:8]
    for c in short:
        safe = _host_safe(c)
        out += [c, "/" + c, c + "/", c + "/x", "a/" + c, "file:///" + c,
                c + "://a.b/", c + "a.b/x", c + ".a.b/x"]
        for scheme in schemes:
            out += [scheme + "a.b/" + c, scheme + "a.b/x" + c,
                    scheme + "a.b" + c]
            if safe:
                out += [scheme + safe + ".a.b/x", scheme + "a.b." + safe
                        + "/x", scheme + safe + ".b/x"]
    for c1, c2 in itertools.islice(itertools.permutations(short, 2), 12):
        out += ["http://a.b/" + c1 + c2, "http://a.b/" + c1 + "/" + c2,
                "s://a.b/" + c1 + c2]
        safe = _host_safe(c1)
        if safe:
            out += ["http://" + safe + ".a.b/" + c2,
                    "s://" + safe + ".a.b/" + c2]
    seen: set[str] = set()
    unique = []
    for cand in out:
        if len(cand) <= _MAX_CANDIDATE_LEN and cand not in seen:
            seen.add(cand)
            unique.append(cand)
    return unique


def _sat(constraints: list[StringConstraint], kind: Optional[str],
         deadline: float) -> Optional[str]:
    """A string satisfying every constraint (and the URL grammar), if the
    candidate pool holds one."""
    needles: list[str] = []
    members: list[str] = []
    for c in constraints:
        needles.extend(c.needles)
        members.extend(c.members)
    for i, cand in enumerate(_candidates(needles, members)):
        if i % 64 == 0 and monotonic() > deadline:
            raise CheckerTimeout()
        if _url_ok(cand, kind) and all(c.holds(cand) for c in constraints):
            return cand
    return None


def check_url_rejection(conditions: list[PathCondition],
                        sink_ref: Optional[Ref],
                        kinds: tuple[str, ...],
                        time_budget: float = 1.0) -> PruneVerdict:
    """Keep unless every consistent reading of the conditions rejects
    every valid URL shape the sink accepts."""
    deadline = monotonic() + time_budget
    flat = [c for c in conditions if not c.alternatives]
    alt_conds = [c for c in conditions if c.alternatives]
    fanout = 1
    for cond in alt_conds:
        fanout *= max(1, len(cond.alternatives))
    if fanout > _MAX_SELECTIONS:
        return KEEP

    statuses: list[tuple[str, tuple[PathCondition, ...], Optional[str]]] = []
    choice_lists = [range(len(c.alternatives)) for c in alt_conds]
    for choice in itertools.product(*choice_lists):
        picked = list(flat)
        for cond, idx in zip(alt_conds, choice):
            picked.extend(a for a in cond.alternatives[idx]
                          if not a.alternatives)
        statuses.append(_selection_status(picked, sink_ref, kinds, deadline))

    for status, _, witness in statuses:
        if status == "sat":
            return PruneVerdict("keep", witness=witness)
    evidence: list[PathCondition] = []
    for _, ev, _w in statuses:
        evidence.extend(ev)
    evidence.extend(alt_conds)
    ordered = tuple(dict.fromkeys(evidence))
    if not ordered:
        return KEEP
    if all(status == "unsat-string" for status, _, _w in statuses):
        return PruneVerdict("prune_always_unsat", ordered)
    return PruneVerdict("prune_url_rejected", ordered)


def _selection_status(conds: list[PathCondition], sink_ref: Optional[Ref],
                      kinds: tuple[str, ...], deadline: float
                      ) -> tuple[str, tuple[PathCondition, ...],
                                 Optional[str]]:
    groups: dict[Ref, list[StringConstraint]] = {}
    for cond in conds:
        constraint = translate_condition(cond)
        if constraint is not None:
            groups.setdefault(constraint.var, []).append(constraint)

    for ref in sorted(groups, key=repr):
        if ref == sink_ref:
            continue
        if _sat(groups[ref], None, deadline) is None:
            return ("unsat-string",
                    tuple(cs.origin for cs in groups[ref]), None)

    sink_constraints = groups.get(sink_ref, []) if sink_ref is not None \
        else []
    if not sink_constraints:
        # nothing pins the sink string: any URL the attacker likes
        return ("sat", (), "http://evil.test/")
    for kind in kinds:
        witness = _sat(sink_constraints, kind, deadline)
        if witness is not None:
            return ("sat", (), witness)
    return ("unsat-url", tuple(cs.origin for cs in sink_constraints), None)


# ---- orchestration -------------------------------------------------------

def prune_paths(paths, cfgs: dict[str, Cfg], callgraph: CallGraph,
                consts: dict[str, ConstMap], project: Project, *,
                enabled: bool = True, emit_smt_dir: Optional[str] = None,
                time_budget: float = 1.0) -> PruneOutcome:
    """Extract conditions for every path; drop the provably infeasible
    ones (unless disabled, in which case conditions are still reported)."""
    kept: list[KeptPath] = []
    pruned: list[PrunedPath] = []
    for index, path in enumerate(paths):
        extraction = extract(path, cfgs, callgraph, consts, project)
        conds = extraction.conditions
        kinds = (KIND_REQUEST, KIND_FILE) if path.taint_kind == "both" \
            else (path.taint_kind,)
        if emit_smt_dir is not None:
            smt.emit_path(emit_smt_dir, index, conds, extraction.sink_ref,
                          kinds)
        if not enabled:
            kept.append(KeptPath(path, conds, ("pruning-disabled",)))
            continue
        if extraction.budget_exceeded:
            kept.append(KeptPath(path, conds,
                                 ("condition-extraction-budget",)))
            continue
        evidence = check_always_unsat(conds)
        if evidence:
            pruned.append(PrunedPath(
                path, PruneVerdict("prune_always_unsat", evidence), conds))
            continue
        try:
            verdict = check_url_rejection(conds, extraction.sink_ref, kinds,
                                          time_budget)
        except CheckerTimeout:
            log.warning("checker timeout at %s:%d; keeping",
                        path.sink.file, path.sink.line)
            kept.append(KeptPath(path, conds,
                                 ("always-unsat:pass", "url-check:timeout")))
            continue
        if verdict.action == "keep":
            kept.append(KeptPath(path, conds,
                                 ("always-unsat:pass", "url-check:pass")))
        else:
            pruned.append(PrunedPath(path, verdict, conds))
    return PruneOutcome(kept, pruned)
