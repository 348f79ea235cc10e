"""Command-line interface.

`taintforge analyze <root>` runs the full pipeline and writes a report;
the `--dump-*` flags stop after the relevant stage and print that stage's
view of the program instead, always exiting 0.  Exit codes for a full
run: 0 clean, 1 findings present, 2 fatal error.
"""
from __future__ import annotations

import sys

import click

from . import __version__
from .frontend.astnodes import dump_sexpr
from .ir.ssa import dump_cfg
from .pipeline import AnalysisOptions, load_stages, run_analysis
from .report import emit_report
from .taint.engine import format_value_taints

EXIT_CLEAN = 0
EXIT_FINDINGS = 1
EXIT_FATAL = 2


@click.group()
@click.version_option(version=__version__, prog_name="taintforge")
def main() -> None:
    """Static SSRF taint analysis for PHP projects."""


def _fatal(message: str) -> None:
    click.echo(f"taintforge: error: {message}", err=True)
    sys.exit(EXIT_FATAL)


def _find_cfg(cfgs, name: str):
    want = name.lower()
    for qualified, cfg in sorted(cfgs.items()):
        if qualified == want or cfg.display.lower() == want:
            return cfg
    return None


def _dump_ast(project, rel: str) -> None:
    src = project.file_by_path(rel)
    if src is None:
        matches = [f for f in project.files
                   if f.path.endswith("/" + rel) or f.path == rel]
        src = matches[0] if len(matches) == 1 else None
    if src is None:
        _fatal(f"no parsed file named {rel!r}")
    click.echo(dump_sexpr(src.ast))


@main.command()
@click.argument("root", type=click.Path(exists=True, file_okay=False))
@click.option("--registry", "registry_path",
              type=click.Path(exists=True, dir_okay=False),
              help="Extra source/sink definitions (JSON).")
@click.option("--format", "fmt", type=click.Choice(["json", "text"]),
              default="json", show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False),
              help="Write the report here instead of stdout.")
@click.option("--exclude", "excludes", multiple=True, metavar="GLOB",
              help="Skip files matching this glob (repeatable).")
@click.option("--no-implicit-calls", is_flag=True,
              help="Resolve only literal call targets.")
@click.option("--no-third-party", is_flag=True,
              help="Skip harvesting/classifying documented project APIs.")
@click.option("--no-safety-string", is_flag=True,
              help="Disable concatenation clearance for pinned prefixes.")
@click.option("--no-pruning", is_flag=True,
              help="Report every flow, even provably infeasible ones.")
@click.option("--emit-smt", "emit_smt_dir", type=click.Path(file_okay=False),
              help="Write one SMT-LIB file per checked flow into this directory.")
@click.option("--classifier-url", help="Chat-completion endpoint for "
              "third-party classification (offline heuristic otherwise).")
@click.option("--classifier-cache", type=click.Path(dir_okay=False),
              help="Verdict cache file for the classifier.")
@click.option("--jobs", type=click.IntRange(min=1), default=1,
              show_default=True, help="Parallel workers for parsing and "
              "classification; analysis itself is deterministic.")
@click.option("--fixpoint-budget", type=click.IntRange(min=1), default=64,
              show_default=True,
              help="Iteration cap per function before giving up on it.")
@click.option("--dump-ast", "dump_ast_file", metavar="FILE",
              help="Print one file's syntax tree and exit.")
@click.option("--dump-cfg", "dump_cfg_fn", metavar="FUNCTION",
              help="Print one function's control-flow graph and exit.")
@click.option("--dump-callgraph", is_flag=True,
              help="Print every resolved call edge and exit.")
@click.option("--dump-taint", "dump_taint_fn", metavar="FUNCTION",
              help="Print one function's final value taints and exit.")
def analyze(root, registry_path, fmt, out_path, excludes, no_implicit_calls,
            no_third_party, no_safety_string, no_pruning, emit_smt_dir,
            classifier_url, classifier_cache, jobs, fixpoint_budget,
            dump_ast_file, dump_cfg_fn, dump_callgraph, dump_taint_fn):
    """Analyze the PHP project under ROOT."""
    options = AnalysisOptions(
        registry_path=registry_path,
        excludes=tuple(excludes),
        implicit_calls=not no_implicit_calls,
        third_party=not no_third_party,
        safety_strings=not no_safety_string,
        pruning=not no_pruning,
        emit_smt_dir=emit_smt_dir,
        classifier_url=classifier_url,
        classifier_cache=classifier_cache,
        jobs=jobs,
        fixpoint_budget=fixpoint_budget,
    )
    try:
        if dump_ast_file or dump_cfg_fn:
            project, cfgs = load_stages(root, options)
            if dump_ast_file:
                _dump_ast(project, dump_ast_file)
            if dump_cfg_fn:
                cfg = _find_cfg(cfgs, dump_cfg_fn)
                if cfg is None:
                    _fatal(f"no function named {dump_cfg_fn!r}")
                click.echo(dump_cfg(cfg))
            sys.exit(EXIT_CLEAN)

        run = run_analysis(root, options)

        if dump_callgraph or dump_taint_fn:
            if dump_callgraph:
                click.echo(run.callgraph.dump())
            if dump_taint_fn:
                cfg = _find_cfg(run.cfgs, dump_taint_fn)
                if cfg is None:
                    _fatal(f"no function named {dump_taint_fn!r}")
                env = run.taint.value_envs.get(cfg.qualified, {})
                click.echo(format_value_taints(cfg, env))
            sys.exit(EXIT_CLEAN)
    except SystemExit:
        raise
    except Exception as exc:            # fatal: bad config, unreadable root
        _fatal(str(exc))

    payload = emit_report(run.report, fmt)
    if out_path:
        with open(out_path, "wb") as fh:
            fh.write(payload)
    else:
        sys.stdout.buffer.write(payload)
        sys.stdout.buffer.flush()
    sys.exit(EXIT_FINDINGS if run.report.groups else EXIT_CLEAN)


if __name__ == "__main__":
    main()
