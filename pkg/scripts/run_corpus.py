#!/usr/bin/env python3
"""Run every corpus program and diff its report against expected.json.

Each corpus directory is a tiny PHP project plus an `expected.json`
describing the report it must produce — overall path/finding counts and
optional detail checks (sink names, hop rules, group keys, condition
substrings, call-graph edges), plus per-ablation overrides re-run under
the corresponding flag.

Exit status is the number of failing programs, so `run_corpus.py` doubles
as a coarse gate in CI and a quick local smoke loop.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from taintforge.pipeline import AnalysisOptions, run_analysis  # noqa: E402

CORPUS = Path(__file__).resolve().parent.parent / "corpus"

ABLATIONS = {
    "no_implicit_calls": {"implicit_calls": False},
    "no_third_party": {"third_party": False},
    "no_safety_string": {"safety_strings": False},
    "no_pruning": {"pruning": False},
}


def options_for(ablation: str | None = None) -> AnalysisOptions:
    kwargs = dict(ABLATIONS[ablation]) if ablation else {}
    return AnalysisOptions(**kwargs)


def finding_set(run) -> set[tuple]:
    """Comparable identity of every reported finding."""
    out = set()
    for group in run.report.groups:
        for f in group.members:
            p = f.path
            out.add((p.source.identifier, p.source.file, p.source.line,
                     p.sink.identifier, p.sink.file, p.sink.line))
    return out


def _findings(run):
    return [f for g in run.report.groups for f in g.members]


def compare(run, expect: dict, label: str) -> list[str]:
    errors = []

    def num(key, actual):
        if key in expect and expect[key] != actual:
            errors.append(f"{label}: {key} = {actual}, expected {expect[key]}")

    rep = run.report
    findings = _findings(run)
    num("paths_found", rep.paths_found)
    num("paths_pruned_unsat", rep.paths_pruned_unsat)
    num("paths_pruned_url", rep.paths_pruned_url)
    num("findings", len(findings))
    num("groups", len(rep.groups))

    if "sinks" in expect:
        got = sorted({f.path.sink.identifier for f in findings})
        if got != sorted(expect["sinks"]):
            errors.append(f"{label}: sinks {got}, expected {expect['sinks']}")
    if "sources" in expect:
        got = sorted({f.path.source.identifier for f in findings})
        if got != sorted(expect["sources"]):
            errors.append(f"{label}: sources {got}, expected {expect['sources']}")
    if "taint_kinds" in expect:
        got = sorted({f.path.taint_kind for f in findings})
        if got != sorted(expect["taint_kinds"]):
            errors.append(f"{label}: kinds {got}, expected {expect['taint_kinds']}")
    if "provenances" in expect:
        got = sorted({f.provenance for f in findings})
        if got != sorted(expect["provenances"]):
            errors.append(f"{label}: provenances {got}, "
                          f"expected {expect['provenances']}")
    if "group_keys" in expect:
        got = sorted(g.key for g in rep.groups)
        if got != sorted(expect["group_keys"]):
            errors.append(f"{label}: group keys {got}, "
                          f"expected {expect['group_keys']}")
    if "hop_rules_contain" in expect:
        rules = {h[2] for f in findings for h in f.path.hops}
        missing = [r for r in expect["hop_rules_contain"] if r not in rules]
        if missing:
            errors.append(f"{label}: hop rules missing {missing} (got {sorted(rules)})")
    if "conditions_contain" in expect:
        text = " | ".join(c.describe() for f in findings for c in f.conditions)
        for needle in expect["conditions_contain"]:
            if needle not in text:
                errors.append(f"{label}: no condition mentions {needle!r} "
                              f"(conditions: {text or '<none>'})")
    if "callgraph_contains" in expect or "callgraph_lacks" in expect:
        dump = run.callgraph.dump()
        for needle in expect.get("callgraph_contains", ()):
            if needle not in dump:
                errors.append(f"{label}: call graph lacks {needle!r}")
        for needle in expect.get("callgraph_lacks", ()):
            if needle in dump:
                errors.append(f"{label}: call graph unexpectedly has {needle!r}")
    return errors


def check_program(program: Path) -> list[str]:
    spec = json.loads((program / "expected.json").read_text())
    errors = compare(run_analysis(program, options_for()), spec["expect"],
                     "default")
    for ablation, expect in spec.get("ablations", {}).items():
        errors.extend(compare(run_analysis(program, options_for(ablation)),
                              expect, ablation))
    return errors


def corpus_programs() -> list[Path]:
    return sorted(p for p in CORPUS.iterdir()
                  if (p / "expected.json").is_file())


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("programs", nargs="*",
                    help="corpus directory names (default: all)")
    args = ap.parse_args()

    programs = ([CORPUS / name for name in args.programs]
                if args.programs else corpus_programs())
    failed = 0
    t0 = time.monotonic()
    for program in programs:
        started = time.monotonic()
        try:
            errors = check_program(program)
        except Exception as exc:       # a crash is a failure, not an abort
            errors = [f"crashed: {exc!r}"]
        elapsed = time.monotonic() - started
        status = "ok" if not errors else "FAIL"
        print(f"[{status:4}] {program.name:32} {elapsed:5.2f}s")
        for line in errors:
            print(f"       - {line}")
        failed += bool(errors)
    total = time.monotonic() - t0
    print(f"\n{len(programs) - failed}/{len(programs)} programs pass "
          f"in {total:.1f}s")
    return failed


if __name__ == "__main__":
    sys.exit(main())
