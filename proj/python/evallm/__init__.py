"""Python access to the evallm benchmarking engine.

Results come back as plain dicts decoded from the engine's JSON output.
"""

import json

from . import _evallm

__all__ = ["extract_spec", "normalize_mark", "canonical_json", "metrics", "ssim_files", "evaluate", "run_cli"]


def extract_spec(text):
    """Extract and normalize the first spec found in raw model output."""
    return json.loads(_evallm.extract_spec(text))


def normalize_mark(raw):
    return _evallm.normalize_mark(raw)


def canonical_json(document):
    """Sorted-key, whitespace-free serialization of a dict or JSON string."""
    text = document if isinstance(document, str) else json.dumps(document)
    return _evallm.canonical_json(text)


def metrics(ground_truth, generated):
    """Automatic metric scores for two specs, keyed by level id."""
    return json.loads(_evallm.metrics(_text(ground_truth), _text(generated)))


def ssim_files(ground_truth, generated):
    return json.loads(_evallm.ssim_files(str(ground_truth), str(generated)))


def evaluate(corpus, bundle, parallelism=1):
    """Evaluate an experiment bundle against a corpus path.

    Returns {"results": [...], "report": {...}}.
    """
    return json.loads(_evallm.evaluate(str(corpus), _text(bundle), parallelism))


def run_cli(args, input=""):
    """Run the evallm CLI in-process; returns (exit_code, stdout, stderr)."""
    return _evallm.run_cli([str(a) for a in args], input)


def _text(value):
    return value if isinstance(value, str) else json.dumps(value)
