"""Canonical serialization of UI screens.

Kept separate from :mod:`adscout.memory` so the simulator can derive state
identifiers without importing the experience store.
"""

from __future__ import annotations

import hashlib
from typing import Iterable, Protocol


class _WidgetLike(Protocol):
    cls: str
    resource_id: str | None
    text: str | None
    content_desc: str | None
    depth: int


class _RegionLike(Protocol):
    label: str


def _clean(value: str | None) -> str:
    if not value:
        return ""
    return " ".join(value.replace("|", "/").split())


def serialize_widgets(widgets: Iterable[_WidgetLike]) -> str:
    """Preorder ``class|resource_id|text`` lines, one ``-`` per depth level."""
    lines = []
    for w in widgets:
        text = w.text if w.text else w.content_desc
        lines.append("-" * w.depth + f"{_clean(w.cls)}|{_clean(w.resource_id)}|{_clean(text)}")
    return "\n".join(lines)


def serialize_canvas(activity: str, regions: Iterable[_RegionLike]) -> str:
    lines = [f"Canvas|{_clean(activity)}|"]
    lines.extend(f"-Region||{_clean(r.label)}" for r in regions)
    return "\n".join(lines)


def short_id(activity: str, canonical: str) -> str:
    """Six hex digits, the display form used in prompts and graph exports."""
    digest = hashlib.sha1(f"{activity}\n{canonical}".encode("utf-8")).hexdigest()
    return digest[:6]
