"""End-to-end analysis driver: parse, lower, resolve, taint, prune, report.

Stage outputs are kept on the returned `AnalysisRun` so callers (CLI dumps,
tests, scripts) can inspect intermediates without re-running anything.
Parsing and third-party classification fan out across `jobs` workers; every
later stage is single-threaded and deterministic, which is what makes the
JSON report byte-stable across parallelism settings.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .callgraph.graph import CallGraph, build_callgraph
from .callgraph.typeinfo import TypeTable, infer_types
from .frontend.project import Project, load_project
from .ir.constvals import ConstMap, compute_consts
from .ir.lower import lower_project
from .ir.ssa import Cfg
from .pruning.checker import PruneOutcome, prune_paths
from .registry import (
    ClassificationCache, OfflineHeuristic, Registry, RemoteClassifier,
    apply_classification, classify_all, harvest_candidates,
    load_builtin_registry,
)
from .report import Report, build_report
from .taint.engine import TaintResult, analyze_taint


@dataclass
class AnalysisOptions:
    registry_path: Optional[str] = None
    excludes: tuple[str, ...] = ()
    implicit_calls: bool = True
    third_party: bool = True
    safety_strings: bool = True
    pruning: bool = True
    emit_smt_dir: Optional[str] = None
    classifier_url: Optional[str] = None
    classifier_cache: Optional[str] = None
    jobs: int = 1
    fixpoint_budget: int = 64
    checker_time_budget: float = 1.0


@dataclass
class AnalysisRun:
    project: Project
    cfgs: dict[str, Cfg]
    consts: dict[str, ConstMap]
    types: TypeTable
    callgraph: CallGraph
    registry: Registry
    taint: TaintResult
    outcome: PruneOutcome
    report: Report


def load_stages(root: str | Path,
                options: Optional[AnalysisOptions] = None):
    """Parse and lower only; enough for the AST/CFG diagnostic dumps."""
    options = options or AnalysisOptions()
    project = load_project(root, excludes=options.excludes,
                           jobs=options.jobs)
    cfgs = lower_project(project)
    return project, cfgs


def build_registry(project: Project,
                   options: AnalysisOptions) -> Registry:
    registry = load_builtin_registry(options.registry_path)
    if not options.third_party:
        return registry
    candidates = harvest_candidates(project)
    if not candidates:
        return registry
    if options.classifier_url:
        classifier = RemoteClassifier(options.classifier_url)
    else:
        classifier = OfflineHeuristic()
    cache = (ClassificationCache(options.classifier_cache)
             if options.classifier_cache else None)
    verdicts, unclassified = classify_all(candidates, classifier, cache,
                                          jobs=options.jobs)
    apply_classification(registry, verdicts, unclassified, candidates)
    return registry


def run_analysis(root: str | Path,
                 options: Optional[AnalysisOptions] = None) -> AnalysisRun:
    options = options or AnalysisOptions()
    project, cfgs = load_stages(root, options)
    consts = {q: compute_consts(c) for q, c in cfgs.items()}
    types = infer_types(project, cfgs)
    callgraph = build_callgraph(project, cfgs, types=types, consts=consts,
                                implicit=options.implicit_calls)
    registry = build_registry(project, options)
    taint = analyze_taint(project, cfgs, callgraph, registry, types, consts,
                          safety_strings=options.safety_strings,
                          fixpoint_budget=options.fixpoint_budget)
    outcome = prune_paths(taint.paths, cfgs, callgraph, consts, project,
                          enabled=options.pruning,
                          emit_smt_dir=options.emit_smt_dir,
                          time_budget=options.checker_time_budget)
    report = build_report(project, outcome, registry,
                          incomplete=tuple(taint.incomplete))
    return AnalysisRun(project, cfgs, consts, types, callgraph, registry,
                       taint, outcome, report)
