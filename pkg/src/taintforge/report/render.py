"""Turning surviving flows into a report: grouping and serialization.

Flows are grouped by shared patch point.  For every flow we reconstruct
the call stack that is live when the sink fires (from the per-hop
function names); flows whose stacks share a function are the same bug
from a fixing perspective — a guard added to the shared function kills
all of them — so they land in one group keyed by the deepest function
common to every member.  Flows that share nothing are keyed by the sink
call site itself.

Two output formats: ``json`` is the stable machine interface (hop
entries carry file/line/rule only; everything ordered by file then
line so repeated runs serialize byte-identically), ``text`` is for
humans and additionally shows the path conditions and any
incomplete-analysis markers.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

from .. import __version__
from ..frontend.project import Project
from ..pruning.checker import KeptPath, PruneOutcome
from ..pruning.conditions import PathCondition
from ..registry.specs import Registry
from ..taint.engine import TaintPath


@dataclass(frozen=True)
class Finding:
    """One surviving source-to-sink flow plus how it earned its place."""
    path: TaintPath
    verdict_trail: tuple[str, ...]          # prune checks survived, in order
    provenance: str                         # builtin | config | classifier
    conditions: tuple[PathCondition, ...] = ()


@dataclass
class VulnGroup:
    key: str                                # patch point or sink site
    members: list[Finding] = field(default_factory=list)


@dataclass
class Report:
    project: str
    files: int
    parse_errors: int
    paths_found: int
    paths_pruned_unsat: int
    paths_pruned_url: int
    groups: list[VulnGroup]
    incomplete: tuple[str, ...] = ()        # functions analysis gave up on


# ---- grouping -----------------------------------------------------------

def sink_stack(path: TaintPath) -> tuple[str, ...]:
    """Functions on the call stack at the moment the sink fires,
    outermost first.

    Walk the hop chain backwards from the sink.  A ``call`` hop whose
    successor hop runs inside the current frame is the entry into that
    frame, so the hop's own function sits one frame further out.  Hops
    reached through returns or property-map teleports belong to frames
    already popped and are skipped.
    """
    stack = [path.sink_fn] if path.sink_fn else []
    current = path.sink_fn
    hops = path.hops
    for i in range(len(hops) - 1, -1, -1):
        file, line, rule, fn = hops[i]
        if rule != "call" or not fn:
            continue
        entered = hops[i + 1][3] if i + 1 < len(hops) else path.sink_fn
        if entered == current and fn != current:
            stack.append(fn)
            current = fn
    stack.reverse()
    return tuple(stack)


def _path_order(path: TaintPath) -> tuple:
    return (path.sink.file, path.sink.line, path.sink.identifier,
            path.source.file, path.source.line, path.source.identifier)


def _sink_site_key(path: TaintPath) -> str:
    fn = path.sink_fn or path.sink.identifier
    return f"{fn} @ {path.sink.file}:{path.sink.line}"


def group_findings(findings: list[Finding]) -> list[VulnGroup]:
    """Partition findings into vulnerability groups.

    Findings whose sink-time call stacks intersect are unioned; a
    cluster with a function common to *all* members is keyed by the
    deepest such function, otherwise the cluster falls apart into
    per-sink-site groups.
    """
    ordered = sorted(findings, key=lambda f: _path_order(f.path))
    stacks = [sink_stack(f.path) for f in ordered]

    parent = list(range(len(ordered)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    by_fn: dict[str, int] = {}
    for i, stack in enumerate(stacks):
        for fn in stack:
            if fn in by_fn:
                parent[find(i)] = find(by_fn[fn])
            else:
                by_fn[fn] = i

    clusters: dict[int, list[int]] = {}
    for i in range(len(ordered)):
        clusters.setdefault(find(i), []).append(i)

    groups: list[VulnGroup] = []
    for members in clusters.values():
        common = set(stacks[members[0]])
        for i in members[1:]:
            common &= set(stacks[i])
        if common:
            # deepest shared frame, by position in the first member's stack
            first = stacks[members[0]]
            key = max(common, key=first.index)
            groups.append(VulnGroup(key, [ordered[i] for i in members]))
        else:
            by_site: dict[str, list[Finding]] = {}
            for i in members:
                by_site.setdefault(_sink_site_key(ordered[i].path),
                                   []).append(ordered[i])
            for key, fs in by_site.items():
                groups.append(VulnGroup(key, fs))
    groups.sort(key=lambda g: (_path_order(g.members[0].path), g.key))
    return groups


# ---- report assembly ----------------------------------------------------

def _sink_provenance(path: TaintPath, registry: Registry) -> str:
    spec = registry.sink_for(path.sink.identifier.lower())
    return spec.provenance if spec is not None else "builtin"


def build_report(project: Project, outcome: PruneOutcome,
                 registry: Registry,
                 incomplete: tuple[str, ...] = ()) -> Report:
    findings = [
        Finding(k.path, k.trail, _sink_provenance(k.path, registry),
                tuple(k.conditions))
        for k in outcome.kept
    ]
    unsat = sum(1 for p in outcome.pruned
                if p.verdict.action == "prune_always_unsat")
    url = sum(1 for p in outcome.pruned
              if p.verdict.action == "prune_url_rejected")
    return Report(
        project=project.root,
        files=len(project.files),
        parse_errors=len(project.parse_failures),
        paths_found=len(outcome.kept) + len(outcome.pruned),
        paths_pruned_unsat=unsat,
        paths_pruned_url=url,
        groups=group_findings(findings),
        incomplete=tuple(incomplete),
    )


# ---- serialization ------------------------------------------------------

def _point_dict(identifier: str, file: str, line: int) -> dict:
    return {"id": identifier, "file": file, "line": line}


def _path_dict(finding: Finding) -> dict:
    p = finding.path
    return {
        "source": _point_dict(p.source.identifier, p.source.file,
                              p.source.line),
        "sink": _point_dict(p.sink.identifier, p.sink.file, p.sink.line),
        "hops": [{"file": f, "line": ln, "rule": rule}
                 for f, ln, rule, _fn in p.hops],
        "taint_kind": p.taint_kind,
        "provenance": finding.provenance,
    }


def render_json(report: Report) -> bytes:
    doc = {
        "version": __version__,
        "project": report.project,
        "stats": {
            "files": report.files,
            "parse_errors": report.parse_errors,
            "paths_found": report.paths_found,
            "paths_pruned_unsat": report.paths_pruned_unsat,
            "paths_pruned_url": report.paths_pruned_url,
            "groups": len(report.groups),
        },
        "groups": [
            {"key": g.key, "paths": [_path_dict(f) for f in g.members]}
            for g in report.groups
        ],
    }
    return (json.dumps(doc, indent=2, ensure_ascii=False) + "\n").encode()


def _render_finding(finding: Finding, out: list[str]) -> None:
    p = finding.path
    chain = [f"{p.source.identifier} ({p.source.file}:{p.source.line})"]
    seen = {(p.source.file, p.source.line)}
    for f, ln, rule, _fn in p.hops:
        if (f, ln) in seen:
            continue
        seen.add((f, ln))
        chain.append(f"{rule} ({f}:{ln})")
    chain.append(f"{p.sink.identifier} ({p.sink.file}:{p.sink.line})")
    out.append("    " + " -> ".join(chain))
    out.append(f"      kind: {p.taint_kind}   sink registry: "
               f"{finding.provenance}   checks: "
               f"{', '.join(finding.verdict_trail)}")
    for cond in finding.conditions:
        out.append(f"      where: {cond.describe()}")


def render_text(report: Report) -> bytes:
    out: list[str] = []
    out.append(f"taintforge {__version__} — {report.project}")
    out.append(f"{report.files} file(s), {report.parse_errors} parse "
               f"error(s); {report.paths_found} flow(s) found, "
               f"{report.paths_pruned_unsat} contradictory, "
               f"{report.paths_pruned_url} never a URL")
    if not report.groups:
        out.append("no findings")
    for n, g in enumerate(report.groups, 1):
        out.append("")
        out.append(f"[{n}] {g.key} — {len(g.members)} flow(s)")
        for finding in g.members:
            _render_finding(finding, out)
    if report.incomplete:
        out.append("")
        out.append("analysis incomplete in: " + ", ".join(report.incomplete))
    out.append("")
    return "\n".join(out).encode()


def emit_report(report: Report, format: str = "json") -> bytes:
    if format == "json":
        return render_json(report)
    if format == "text":
        return render_text(report)
    raise ValueError(f"unknown report format {format!r}")
