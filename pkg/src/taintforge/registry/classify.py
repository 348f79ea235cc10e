"""Candidate classification: offline keyword heuristic and remote LLM client.

Both classifiers answer the same question — is this documented API a taint
source (returns request data), a sink (issues a request to a caller-chosen
destination), or neither.  Verdicts are cached on disk keyed by signature and
classifier version, so re-runs don't re-classify.
"""
from __future__ import annotations

import json
import logging
import os
import re
import tempfile
import urllib.error
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional, Protocol

from .harvest import CandidateFunction

log = logging.getLogger(__name__)

VERDICT_SOURCE = "source"
VERDICT_SINK = "sink"
VERDICT_NEITHER = "neither"

API_KEY_ENV = "TAINTFORGE_CLASSIFIER_KEY"


class ClassifierUnavailable(Exception):
    """Endpoint unreachable or authentication failed."""


class MalformedResponse(Exception):
    """The endpoint answered but not in the expected shape."""


class Classifier(Protocol):
    version: str

    def classify(self, candidate: CandidateFunction) -> str:
        """Return one of source / sink / neither."""
        ...


# ---- offline keyword heuristic -----------------------------------------

_SOURCE_KEYWORDS = ("request", "input", "param", "query", "post", "cookie")
_SINK_KEYWORDS = ("fetch", "download", "request", "url", "http", "curl", "remote")
_NEGATIVE_KEYWORDS = ("exception", "error", "internal", "deprecated")
_SINK_ONLY = tuple(k for k in _SINK_KEYWORDS if k not in _SOURCE_KEYWORDS)


class OfflineHeuristic:
    """Keyword classifier used when no remote endpoint is configured.

    Scores distinct keyword hits over the signature plus doc comment; negative
    keywords (exception/error/internal/deprecated) veto the candidate.
    """

    version = "offline-1"

    def classify(self, candidate: CandidateFunction) -> str:
        text = f"{candidate.signature} {candidate.doc_comment}".lower()
        if any(neg in text for neg in _NEGATIVE_KEYWORDS):
            return VERDICT_NEITHER
        src_hits = {k for k in _SOURCE_KEYWORDS if k in text}
        sink_hits = {k for k in _SINK_KEYWORDS if k in text}
        if not src_hits and not sink_hits:
            return VERDICT_NEITHER
        source_ok = candidate.source_eligible
        if len(src_hits) > len(sink_hits):
            if source_ok:
                return VERDICT_SOURCE
            return VERDICT_SINK if sink_hits else VERDICT_NEITHER
        if len(sink_hits) > len(src_hits):
            return VERDICT_SINK
        # tied and non-zero
        if sink_hits & set(_SINK_ONLY):
            return VERDICT_SINK
        if source_ok:
            return VERDICT_SOURCE
        return VERDICT_SINK


# ---- remote chat-completion client -------------------------------------

_SOURCE_PROMPT = """You will be given a PHP function/method/property from PHP web applications along with its doc comment. Your task is to determine whether it is a potential taint source according to its name and doc comment. Here taint source is defined to be something that can return data from an incoming HTTP request. Think step by step.

For example:
```
Name: \\app\\migration\\exception::getParameters
DocComment: Get the exception parameters @return array
```
This is not a source because it gets information from exception.
```
Name: \\app\\request_interface::get_param
DocComment: Returns the request data in an array.
```
This is a source because it returns data from incoming request (user input)

Name: {signature}
DocComment: {doc}"""

_SINK_PROMPT = """You will be given a PHP function/method/property from PHP web applications along with its doc comment. Your task is to determine whether it is a potential taint sink according to its name and doc comment. Here taint sink is defined to be something that sends a server-side request or retrieves a URL or file whose destination is taken from its arguments. Think step by step.

For example:
```
Name: \\app\\migration\\exception::getParameters
DocComment: Get the exception parameters @return array
```
This is not a sink because it only reads exception state.
```
Name: \\app\\http\\client::fetch_url
DocComment: Fetches the given URL and returns the response body.
```
This is a sink because it issues a request to the URL passed by the caller.

Name: {signature}
DocComment: {doc}"""

_SUMMARIZE_TURN = "Summarize your result in JSON format."

_RESULT_RE = re.compile(r"\{[^{}]*\"result\"[^{}]*\}")


class RemoteClassifier:
    """Two-turn chat-completion classifier against an OpenAI-style endpoint."""

    version = "remote-1"

    def __init__(self, url: str, api_key: Optional[str] = None,
                 model: str = "gpt-4o", timeout: float = 30.0) -> None:
        self.url = url
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        self.model = model
        self.timeout = timeout

    def _chat(self, messages: list[dict]) -> str:
        body = json.dumps({"model": self.model, "messages": messages}).encode()
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        req = urllib.request.Request(self.url, data=body, headers=headers)
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                payload = json.loads(resp.read().decode())
        except (urllib.error.URLError, OSError, TimeoutError) as exc:
            raise ClassifierUnavailable(str(exc)) from exc
        except json.JSONDecodeError as exc:
            raise MalformedResponse(f"non-JSON response: {exc}") from exc
        try:
            return payload["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise MalformedResponse(f"unexpected response shape: {payload!r}") from exc

    def _ask(self, prompt: str) -> bool:
        messages = [{"role": "user", "content": prompt}]
        analysis = self._chat(messages)
        messages.append({"role": "assistant", "content": analysis})
        messages.append({"role": "user", "content": _SUMMARIZE_TURN})
        summary = self._chat(messages)
        match = _RESULT_RE.search(summary)
        if match is None:
            raise MalformedResponse(f"no result object in: {summary!r}")
        try:
            doc = json.loads(match.group(0))
        except json.JSONDecodeError as exc:
            raise MalformedResponse(f"bad result object: {match.group(0)!r}") from exc
        result = doc.get("result")
        if not isinstance(result, bool):
            raise MalformedResponse(f"result is not a boolean: {doc!r}")
        return result

    def _ask_with_retry(self, prompt: str) -> Optional[bool]:
        """One retry on a malformed response, then give up on this role."""
        for attempt in (1, 2):
            try:
                return self._ask(prompt)
            except MalformedResponse as exc:
                log.warning("classifier response malformed (attempt %d): %s",
                            attempt, exc)
        return None

    def classify(self, candidate: CandidateFunction) -> str:
        if candidate.source_eligible:
            verdict = self._ask_with_retry(_SOURCE_PROMPT.format(
                signature=candidate.signature, doc=candidate.doc_comment))
            if verdict:
                return VERDICT_SOURCE
        verdict = self._ask_with_retry(_SINK_PROMPT.format(
            signature=candidate.signature, doc=candidate.doc_comment))
        if verdict:
            return VERDICT_SINK
        return VERDICT_NEITHER


# ---- on-disk verdict cache ---------------------------------------------

class ClassificationCache:
    """Line-per-record cache: ``signature<TAB>verdict<TAB>classifier-version``."""

    def __init__(self, path: str | Path) -> None:
        self.path = Path(path)
        self.entries: dict[str, tuple[str, str]] = {}   # sig -> (verdict, version)
        self._load()

    def _load(self) -> None:
        if not self.path.exists():
            return
        for line in self.path.read_text().splitlines():
            parts = line.split("\t")
            if len(parts) != 3:
                continue
            sig, verdict, version = parts
            if verdict in (VERDICT_SOURCE, VERDICT_SINK, VERDICT_NEITHER):
                self.entries[sig] = (verdict, version)

    def get(self, signature: str, version: str) -> Optional[str]:
        hit = self.entries.get(signature)
        if hit is None or hit[1] != version:
            return None
        return hit[0]

    def put(self, signature: str, verdict: str, version: str) -> None:
        self.entries[signature] = (verdict, version)

    def save(self) -> None:
        lines = [f"{sig}\t{verdict}\t{version}"
                 for sig, (verdict, version) in sorted(self.entries.items())]
        self.path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=str(self.path.parent),
                                   prefix=self.path.name, suffix=".tmp")
        try:
            with os.fdopen(fd, "w") as fh:
                fh.write("\n".join(lines) + ("\n" if lines else ""))
            os.replace(tmp, self.path)
        except BaseException:
            try:
                os.unlink(tmp)
            except OSError:
                pass
            raise


def classify_all(candidates: list[CandidateFunction], classifier: Classifier,
                 cache: Optional[ClassificationCache] = None,
                 jobs: int = 1) -> tuple[dict[str, str], list[str]]:
    """Classify every candidate; returns (signature -> verdict, unclassified).

    Unclassified signatures are those the classifier could not reach; they are
    treated as `neither` but surfaced so a report can flag them.
    """
    verdicts: dict[str, str] = {}
    unclassified: list[str] = []
    pending: list[CandidateFunction] = []
    for cand in candidates:
        hit = cache.get(cand.signature, classifier.version) if cache else None
        if hit is not None:
            verdicts[cand.signature] = hit
        else:
            pending.append(cand)

    def _run(cand: CandidateFunction) -> tuple[str, str, bool]:
        try:
            return cand.signature, classifier.classify(cand), True
        except ClassifierUnavailable as exc:
            log.warning("classifier unavailable for %s: %s", cand.signature, exc)
            return cand.signature, VERDICT_NEITHER, False

    if jobs > 1 and len(pending) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run, pending))
    else:
        results = [_run(c) for c in pending]

    for signature, verdict, reached in results:
        verdicts[signature] = verdict
        if not reached:
            unclassified.append(signature)
        elif cache is not None:
            cache.put(signature, verdict, classifier.version)
    if cache is not None:
        cache.save()
    return verdicts, sorted(unclassified)
