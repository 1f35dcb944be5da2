"""Python bindings for the pacvd static-analysis toolkit."""

import json

from . import _pacvd
from ._pacvd import (
    Error,
    ParseError,
    SchemaError,
    code_tokens,
    compute_metrics,
    default_catalog,
    jaccard,
    levenshtein,
    parse_verdict,
    run_cli,
    strategies,
)

__all__ = [
    "Error",
    "ParseError",
    "SchemaError",
    "abstract",
    "build_prompt",
    "code_tokens",
    "compute_metrics",
    "default_catalog",
    "jaccard",
    "levenshtein",
    "parse_verdict",
    "run_cli",
    "strategies",
]


def abstract(sources, target, level="A3", depth=3, include_fuzzy_at_a2=False, catalog=None):
    """Abstracts the callees of `target`.

    `sources` maps paths to C text, or is a list of (path, text) pairs. Returns the JSON report
    as a dict; the gray-box text is under "rendered".
    """
    items = list(sources.items()) if isinstance(sources, dict) else list(sources)
    _, report = _pacvd.abstract_json(items, target, level, depth, include_fuzzy_at_a2, catalog)
    return json.loads(report)


def build_prompt(strategy, code, api_text="", exemplars="", k=2, seed=0):
    """Returns (bundle dict, prompt hash). `exemplars` is JSONL text."""
    bundle, digest = _pacvd.build_prompt_json(strategy, code, api_text, exemplars, k, seed)
    return json.loads(bundle), digest
