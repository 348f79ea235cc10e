"""Source/sink registry: built-in defaults, config merging, lookup.

The registry holds the superglobal sources, the shipped sink table, and any
entries added from a config file or by the third-party classification
pipeline.  Merged registries serialize byte-stably so runs are comparable.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

SUPERGLOBAL_SOURCES = ("_GET", "_POST", "_REQUEST", "_COOKIE", "_SERVER")

CATEGORY_NETWORK = "network"
CATEGORY_FILE = "file"

ACCEPTS_REQUEST = "request_url"
ACCEPTS_FILE = "file_url"
ACCEPTS_BOTH = "both"


class ConfigError(Exception):
    """Malformed registry config; message carries line/field context."""


@dataclass(frozen=True)
class SourceSpec:
    kind: str                   # superglobal | function | method
    identifier: str             # _GET, or \app\request_interface::get_param
    taint_of_return: bool = True
    provenance: str = "builtin"   # builtin | config | classifier


@dataclass(frozen=True)
class SinkSpec:
    identifier: str
    url_param_index: int
    category: str               # network | file
    accepts: str                # request_url | file_url | both
    provenance: str = "builtin"


# The shipped sink table.  curl_setopt's url argument is the option *value*
# (index 2); it only acts as a sink when the option selects the URL.
_DEFAULT_SINKS = [
    SinkSpec("curl_init", 0, CATEGORY_NETWORK, ACCEPTS_BOTH),
    SinkSpec("curl_setopt", 2, CATEGORY_NETWORK, ACCEPTS_BOTH),
    SinkSpec("curl_exec", 0, CATEGORY_NETWORK, ACCEPTS_BOTH),
    SinkSpec("fsockopen", 0, CATEGORY_NETWORK, ACCEPTS_REQUEST),
    SinkSpec("get_headers", 0, CATEGORY_NETWORK, ACCEPTS_REQUEST),
    SinkSpec("file_get_contents", 0, CATEGORY_FILE, ACCEPTS_BOTH),
    SinkSpec("fopen", 0, CATEGORY_FILE, ACCEPTS_BOTH),
    SinkSpec("readfile", 0, CATEGORY_FILE, ACCEPTS_BOTH),
    SinkSpec("file", 0, CATEGORY_FILE, ACCEPTS_BOTH),
    SinkSpec("copy", 0, CATEGORY_FILE, ACCEPTS_BOTH),
    SinkSpec("simplexml_load_file", 0, CATEGORY_FILE, ACCEPTS_BOTH),
    SinkSpec("getimagesize", 0, CATEGORY_FILE, ACCEPTS_BOTH),
]


def normalize_identifier(raw: str) -> str:
    """Canonical lookup form: lowercase, no leading backslash."""
    return raw.strip().lstrip("\\").lower()


def _tail_form(identifier: str) -> str:
    """`ns\\client::get` and `client::get` should both match a resolved
    `client::get` call; drop namespace segments before the class."""
    if "::" in identifier:
        cls, method = identifier.rsplit("::", 1)
        cls = cls.rsplit("\\", 1)[-1]
        return f"{cls}::{method}"
    return identifier.rsplit("\\", 1)[-1]


@dataclass
class Registry:
    sources: dict[str, SourceSpec] = field(default_factory=dict)
    sinks: dict[str, SinkSpec] = field(default_factory=dict)
    unclassified: list[str] = field(default_factory=list)

    def add_source(self, spec: SourceSpec) -> None:
        key = spec.identifier if spec.kind == "superglobal" \
            else normalize_identifier(spec.identifier)
        self.sources[key] = spec

    def add_sink(self, spec: SinkSpec) -> None:
        self.sinks[normalize_identifier(spec.identifier)] = spec

    def source_for(self, qualified: str) -> Optional[SourceSpec]:
        """Look up a resolved call target (lowercased qualified name)."""
        spec = self.sources.get(qualified)
        if spec is not None and spec.kind != "superglobal":
            return spec
        for key, spec in self.sources.items():
            if spec.kind != "superglobal" and _tail_form(key) == qualified:
                return spec
        return None

    def sink_for(self, qualified: str) -> Optional[SinkSpec]:
        spec = self.sinks.get(qualified)
        if spec is not None:
            return spec
        for key, spec in self.sinks.items():
            if _tail_form(key) == qualified:
                return spec
        return None

    def serialize(self) -> str:
        """Byte-stable canonical JSON for the merged registry."""
        doc = {
            "sources": [
                {
                    "kind": s.kind,
                    "identifier": s.identifier,
                    "taint_of_return": s.taint_of_return,
                    "provenance": s.provenance,
                }
                for _, s in sorted(self.sources.items())
            ],
            "sinks": [
                {
                    "identifier": s.identifier,
                    "url_param_index": s.url_param_index,
                    "category": s.category,
                    "accepts": s.accepts,
                    "provenance": s.provenance,
                }
                for _, s in sorted(self.sinks.items())
            ],
            "unclassified": sorted(self.unclassified),
        }
        return json.dumps(doc, indent=2, sort_keys=True)


def default_registry() -> Registry:
    reg = Registry()
    for name in SUPERGLOBAL_SOURCES:
        reg.add_source(SourceSpec(kind="superglobal", identifier=name))
    for sink in _DEFAULT_SINKS:
        reg.add_sink(sink)
    return reg


def _require(entry: dict, field_name: str, index: int, section: str):
    if field_name not in entry:
        raise ConfigError(f"{section}[{index}]: missing field {field_name!r}")
    return entry[field_name]


def load_builtin_registry(config_path: Optional[str | Path] = None) -> Registry:
    """Defaults merged with an optional JSON config.

    Config schema::

        {
          "sources": [{"kind": "...", "identifier": "...", "taint_of_return": true}],
          "sinks":   [{"identifier": "...", "url_param_index": 0,
                       "category": "network", "accepts": "both", "arity": 2}],
          "remove_sources": ["name"],
          "remove_sinks": ["name"]
        }
    """
    reg = default_registry()
    if config_path is None:
        return reg
    path = Path(config_path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read registry config {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"registry config line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("registry config: top level must be an object")

    for i, entry in enumerate(doc.get("sources", [])):
        kind = _require(entry, "kind", i, "sources")
        identifier = _require(entry, "identifier", i, "sources")
        if kind not in ("superglobal", "function", "method"):
            raise ConfigError(f"sources[{i}]: bad kind {kind!r}")
        reg.add_source(SourceSpec(
            kind=kind, identifier=identifier,
            taint_of_return=bool(entry.get("taint_of_return", True)),
            provenance="config"))

    for i, entry in enumerate(doc.get("sinks", [])):
        identifier = _require(entry, "identifier", i, "sinks")
        idx = _require(entry, "url_param_index", i, "sinks")
        if not isinstance(idx, int) or idx < 0:
            raise ConfigError(f"sinks[{i}]: url_param_index must be a non-negative integer")
        category = entry.get("category", CATEGORY_NETWORK)
        if category not in (CATEGORY_NETWORK, CATEGORY_FILE):
            raise ConfigError(f"sinks[{i}]: bad category {category!r}")
        accepts = entry.get("accepts", ACCEPTS_BOTH)
        if accepts not in (ACCEPTS_REQUEST, ACCEPTS_FILE, ACCEPTS_BOTH):
            raise ConfigError(f"sinks[{i}]: bad accepts {accepts!r}")
        arity = entry.get("arity")
        if arity is not None and idx >= int(arity):
            raise ConfigError(
                f"sinks[{i}]: url_param_index {idx} out of range for arity {arity}")
        reg.add_sink(SinkSpec(identifier=identifier, url_param_index=idx,
                              category=category, accepts=accepts,
                              provenance="config"))

    for name in doc.get("remove_sources", []):
        key = name.lstrip("$")
        if key in SUPERGLOBAL_SOURCES:
            raise ConfigError(
                f"remove_sources: superglobal {name!r} cannot be removed")
        reg.sources.pop(normalize_identifier(key), None)
    for name in doc.get("remove_sinks", []):
        reg.sinks.pop(normalize_identifier(name), None)
    return reg
