"""Deterministic JSON rendering for machine-readable reports.

Floats are emitted with 17 significant digits so reports round-trip
exactly and identical runs produce byte-identical output.
"""

from __future__ import annotations

import json
import re

_TAG = "@@float17@@:"
_TAGGED = re.compile(r'"@@float17@@:([^"]*)"')


def _tag_floats(obj):
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
        return obj
    if isinstance(obj, float):
        return _TAG + format(obj, ".17g")
    if isinstance(obj, dict):
        return {k: _tag_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_tag_floats(v) for v in obj]
    raise TypeError(f"cannot serialize {type(obj).__name__} in a report")


def render_json(payload) -> str:
    """Serialize a report payload with 17-significant-digit floats."""
    return _TAGGED.sub(r"\1", json.dumps(_tag_floats(payload), indent=2))
