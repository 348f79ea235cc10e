from .render import (
    Finding, Report, VulnGroup, build_report, emit_report, group_findings,
    render_json, render_text, sink_stack,
)

__all__ = [
    "Finding", "Report", "VulnGroup", "build_report", "emit_report",
    "group_findings", "render_json", "render_text", "sink_stack",
]
