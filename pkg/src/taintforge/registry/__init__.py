from .specs import (
    ACCEPTS_BOTH, ACCEPTS_FILE, ACCEPTS_REQUEST, CATEGORY_FILE,
    CATEGORY_NETWORK, ConfigError, Registry, SinkSpec, SourceSpec,
    SUPERGLOBAL_SOURCES, default_registry, load_builtin_registry,
    normalize_identifier,
)
from .harvest import CandidateFunction, candidate_from, harvest_candidates
from .classify import (
    API_KEY_ENV, Classifier, ClassificationCache, ClassifierUnavailable,
    MalformedResponse, OfflineHeuristic, RemoteClassifier, VERDICT_NEITHER,
    VERDICT_SINK, VERDICT_SOURCE, classify_all,
)


def apply_classification(registry: Registry, verdicts: dict[str, str],
                         unclassified: list[str],
                         candidates: list[CandidateFunction] = ()) -> None:
    """Fold classifier verdicts into a registry as classifier-provenance entries."""
    url_params = {c.signature: c.url_param_index for c in candidates}
    for signature in sorted(verdicts):
        verdict = verdicts[signature]
        if verdict == VERDICT_SOURCE:
            kind = "method" if "::" in signature else "function"
            registry.add_source(SourceSpec(kind=kind, identifier=signature,
                                           provenance="classifier"))
        elif verdict == VERDICT_SINK:
            registry.add_sink(SinkSpec(identifier=signature,
                                       url_param_index=url_params.get(signature, 0),
                                       category=CATEGORY_NETWORK,
                                       accepts=ACCEPTS_BOTH,
                                       provenance="classifier"))
    registry.unclassified.extend(unclassified)
