"""Tie-aware pairwise comparison scoring (Python bindings)."""

import json as _json

from ._pcs import *  # noqa: F401,F403
from ._pcs import _evaluate_json


def evaluate(pairs, gamma):
    """Evaluation report for scored pairs as a dict."""
    return _json.loads(_evaluate_json(pairs, gamma))


__all__ = [name for name in dir() if not name.startswith("_")]
