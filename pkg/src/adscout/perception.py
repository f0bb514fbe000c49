"""Cross-rendering perception.

Hierarchy screens and canvas screens are both reduced to a list of
:class:`ActionableElement`. Canvas screens go through a hybrid detector
(simulated deep detector plus a grid heuristic), region consolidation and
captioning. Hierarchy screens are captioned only where metadata is missing.
"""

from __future__ import annotations

import json
import logging
import random
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Protocol, Sequence

from adscout.app_model import UiState, Widget

logger = logging.getLogger(__name__)

CAPTION_TAGS = ("AD", "POTENTIAL_AD", "UI_ELEMENT")
TAG_ALIASES = {"AD HINT": "AD", "AD_HINT": "AD", "POTENTIAL AD": "POTENTIAL_AD", "UI ELEMENT": "UI_ELEMENT"}
DEFAULT_MEDIA_CLASSES = ("ImageView", "ImageButton", "WebView")
DEFAULT_IOU = 0.5

BACK_TEXT = "[BACK] Return to previous screen"
SCROLL_TEXT = "[SCROLL] Scroll down for more content"

Rect = tuple[int, int, int, int]


@dataclass(frozen=True)
class CaptionTag:
    tag: str
    description: str

    def __post_init__(self):
        if self.tag not in CAPTION_TAGS:
            raise ValueError(f"unknown caption tag {self.tag!r}")

    def render(self) -> str:
        return f"[{self.tag}] {self.description}"


@dataclass(frozen=True)
class ActionableElement:
    index: int
    source: str  # "hierarchy" | "region" | "global"
    class_or_kind: str
    text: str | None
    bounds: Rect
    action_key: str
    resource_id: str | None = None
    semantic_caption: CaptionTag | None = None
    widget: Widget | None = field(default=None, compare=False, repr=False)
    semantic_gain: float | None = field(default=None, compare=False, repr=False)

    @property
    def is_global(self) -> bool:
        return self.source == "global"

    def label(self) -> str:
        """Best human-readable text: caption, then text, then nothing."""
        if self.semantic_caption is not None:
            return self.semantic_caption.render()
        return self.text or ""


@dataclass(frozen=True)
class RegionProposal:
    bounds: Rect
    confidence: float
    origin: str  # "deep_detector" | "heuristic_analyzer"
    label_hint: int | None = field(default=None, compare=False)

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError("confidence must lie in [0, 1]")


# --------------------------------------------------------------------------
# Hierarchy


def _global_elements(start: int, scrollable: bool, screen: tuple[int, int]) -> list[ActionableElement]:
    w, h = screen
    out = [ActionableElement(start, "global", "BackButton", BACK_TEXT, (0, h - 1, w, h), "back")]
    if scrollable:
        out.append(ActionableElement(start + 1, "global", "ScrollAction", SCROLL_TEXT, (0, 0, w, h), "scroll"))
    return out


def normalize_hierarchy(state: UiState) -> list[ActionableElement]:
    elements = []
    for w in state.widgets:
        if not w.clickable:
            continue
        elements.append(ActionableElement(
            index=len(elements),
            source="hierarchy",
            class_or_kind=w.simple_class,
            text=w.text or w.content_desc,
            bounds=w.bounds,
            action_key=f"tap:{w.index}",
            resource_id=w.resource_id,
            widget=w,
            semantic_gain=w.semantic_gain,
        ))
    scrollable = any(w.scrollable for w in state.widgets)
    return elements + _global_elements(len(elements), scrollable, state.screen_size)


# --------------------------------------------------------------------------
# Regions


def iou(a: Rect, b: Rect) -> float:
    ix = max(0, min(a[2], b[2]) - max(a[0], b[0]))
    iy = max(0, min(a[3], b[3]) - max(a[1], b[1]))
    inter = ix * iy
    if inter == 0:
        return 0.0
    area = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter
    return inter / area


class RegionDetector(Protocol):
    def propose(self, state: UiState) -> list[RegionProposal]: ...


class DetectorFailure(RuntimeError):
    pass


class SimulatedDeepDetector:
    """Stand-in for a trained detector: samples the bundle's ground-truth regions.

    ``recall`` picks exactly ``round(recall * n)`` regions; ``noise`` adds
    ``round(noise * n)`` spurious low-confidence boxes.
    """

    def __init__(self, recall: float = 1.0, noise: float = 0.0, seed: int = 0, confidence: float = 0.9):
        if not 0.0 <= recall <= 1.0 or noise < 0:
            raise ValueError("recall must lie in [0, 1] and noise must be >= 0")
        self.recall = recall
        self.noise = noise
        self.seed = seed
        self.confidence = confidence

    def propose(self, state: UiState) -> list[RegionProposal]:
        regions = list(state.canvas_regions)
        rng = random.Random(f"{self.seed}:{state.state_fingerprint}")
        keep = round(self.recall * len(regions))
        chosen = sorted(rng.sample(range(len(regions)), keep))
        out = [RegionProposal(regions[i].bounds, self.confidence, "deep_detector", regions[i].index) for i in chosen]
        w, h = state.screen_size
        for _ in range(round(self.noise * len(regions))):
            bw, bh = rng.randint(40, w // 3), rng.randint(40, h // 6)
            x, y = rng.randint(0, w - bw), rng.randint(0, h - bh)
            out.append(RegionProposal((x, y, x + bw, y + bh), 0.3, "deep_detector"))
        return out


class GridHeuristicAnalyzer:
    """Snaps declared coarse contours outward to a grid and merges overlaps."""

    def __init__(self, cell: int = 60, confidence: float = 0.5):
        self.cell = cell
        self.confidence = confidence

    def propose(self, state: UiState) -> list[RegionProposal]:
        c = self.cell
        w, h = state.screen_size
        boxes = []
        for l, t, r, b in state.contours:
            boxes.append([max(0, l // c * c), max(0, t // c * c), min(w, -(-r // c) * c), min(h, -(-b // c) * c)])
        merged = True
        while merged:
            merged = False
            for i in range(len(boxes)):
                for j in range(i + 1, len(boxes)):
                    a, b = boxes[i], boxes[j]
                    if a[0] < b[2] and b[0] < a[2] and a[1] < b[3] and b[1] < a[3]:
                        boxes[i] = [min(a[0], b[0]), min(a[1], b[1]), max(a[2], b[2]), max(a[3], b[3])]
                        del boxes[j]
                        merged = True
                        break
                if merged:
                    break
        return [RegionProposal(tuple(bx), self.confidence, "heuristic_analyzer") for bx in boxes]


@dataclass
class HybridDetector:
    deep: RegionDetector = field(default_factory=SimulatedDeepDetector)
    heuristic: RegionDetector = field(default_factory=GridHeuristicAnalyzer)
    degraded: bool = False

    def propose(self, state: UiState) -> list[RegionProposal]:
        return detect_regions(state, self)


def detect_regions(state: UiState, detector: RegionDetector | HybridDetector) -> list[RegionProposal]:
    """Deep proposals followed by heuristic proposals; falls back to heuristics only on failure."""
    if state.rendering != "canvas":
        raise ValueError("detect_regions expects a canvas-rendered state")
    if not isinstance(detector, HybridDetector):
        return list(detector.propose(state))
    try:
        deep = list(detector.deep.propose(state))
        detector.degraded = False
    except Exception as exc:  # noqa: BLE001 - any backend failure degrades
        logger.warning("deep detector failed (%s); using heuristic proposals only", exc)
        deep = []
        detector.degraded = True
    return deep + list(detector.heuristic.propose(state))


def consolidate_regions(a: Sequence[RegionProposal], b: Sequence[RegionProposal] = (),
                        iou_threshold: float = DEFAULT_IOU) -> list[RegionProposal]:
    """Greedy suppression: highest confidence first, drop anything overlapping a keeper."""
    if not 0.0 < iou_threshold <= 1.0:
        raise ValueError("iou_threshold must lie in (0, 1]")
    pool = list(a) + list(b)
    order = sorted(range(len(pool)), key=lambda i: (-pool[i].confidence, i))
    kept: list[int] = []
    for i in order:
        if all(iou(pool[i].bounds, pool[k].bounds) < iou_threshold for k in kept):
            kept.append(i)
    return [pool[i] for i in sorted(kept)]


def normalize_canvas(state: UiState, proposals: Sequence[RegionProposal]) -> list[ActionableElement]:
    elements = []
    for p in sorted(proposals, key=lambda p: (p.bounds[1], p.bounds[0])):
        cx = (p.bounds[0] + p.bounds[2]) // 2
        cy = (p.bounds[1] + p.bounds[3]) // 2
        gain = None
        if p.label_hint is not None and p.label_hint < len(state.canvas_regions):
            gain = state.canvas_regions[p.label_hint].semantic_gain
        elements.append(ActionableElement(
            index=len(elements),
            source="region",
            class_or_kind="Region",
            text=None,
            bounds=p.bounds,
            action_key=f"tap_point:{cx},{cy}",
            semantic_gain=gain,
        ))
    return elements + _global_elements(len(elements), False, state.screen_size)


# --------------------------------------------------------------------------
# Selective vision and captioning


def should_invoke_vlm(element: ActionableElement, mode: str,
                      media_classes: Sequence[str] = DEFAULT_MEDIA_CLASSES) -> bool:
    if element.is_global:
        return False
    if mode == "canvas" or element.source == "region":
        return True
    w = element.widget
    text = element.text if w is None else (w.text or w.content_desc)
    if text and text.strip():
        return False
    return any(element.class_or_kind.endswith(cls) for cls in media_classes)


@dataclass(frozen=True)
class CaptionRequest:
    """One crop to describe; ``crop`` is a reference, never pixels."""

    id: int
    crop: str
    bounds: Rect
    element: ActionableElement | None = field(default=None, compare=False, repr=False)
    state: UiState | None = field(default=None, compare=False, repr=False)


CAPTION_INSTRUCTION = (
    "You are an expert mobile ad detector. Analyze each cropped UI element and label it with one of: "
    "[AD]: an element that very likely opens or plays an advertisement, "
    "[POTENTIAL_AD]: an element that may lead to promotional content, "
    "[UI_ELEMENT]: an ordinary part of the app interface. "
    "Reply with a JSON array of objects with 'id' and 'description', the description starting with the tag."
)


class VisionCaptioner(Protocol):
    def describe(self, instruction: str, requests: Sequence[CaptionRequest]) -> str: ...


class ScriptedCaptioner:
    """Echoes ground-truth labels stored in the bundle, formatted like a model reply."""

    def __init__(self):
        self.calls = 0
        self.items = 0

    def _label(self, req: CaptionRequest) -> tuple[str, str]:
        el, state = req.element, req.state
        if el is not None and el.widget is not None:
            if el.widget.vlm_label is not None:
                return el.widget.vlm_label
            text = el.widget.text or el.widget.content_desc
            what = f"labeled '{text}'" if text else "without visible text"
            return ("UI_ELEMENT", f"A {el.class_or_kind} {what}.")
        if state is not None:
            best, best_iou = None, 0.0
            for region in state.canvas_regions:
                score = iou(region.bounds, req.bounds)
                if score > best_iou:
                    best, best_iou = region, score
            if best is not None and best_iou >= 0.3:
                return (best.tag, best.label)
        return ("UI_ELEMENT", "An unlabeled area of the screen.")

    def describe(self, instruction: str, requests: Sequence[CaptionRequest]) -> str:
        self.calls += 1
        self.items += len(requests)
        payload = []
        for req in requests:
            tag, desc = self._label(req)
            payload.append({"id": req.id, "description": f"[{tag}] {desc}"})
        return json.dumps(payload)


_TAG_RE = re.compile(r"^\s*\[([A-Z _]+)\]\s*(.*)$", re.S)


def parse_caption(description: str) -> CaptionTag:
    m = _TAG_RE.match(description)
    if m:
        tag = m.group(1).strip()
        tag = TAG_ALIASES.get(tag, tag)
        if tag in CAPTION_TAGS:
            return CaptionTag(tag, m.group(2).strip())
    return CaptionTag("UI_ELEMENT", description.strip())


def _parse_reply(raw: str, ids: Sequence[int]) -> dict[int, CaptionTag]:
    start, end = raw.find("["), raw.rfind("]")
    if start < 0 or end <= start:
        raise ValueError("no JSON array in captioner reply")
    items = json.loads(raw[start:end + 1])
    out = {}
    for item in items:
        if not isinstance(item, dict) or "id" not in item or "description" not in item:
            raise ValueError("caption items need 'id' and 'description'")
        out[int(item["id"])] = parse_caption(str(item["description"]))
    missing = [i for i in ids if i not in out]
    if missing:
        raise ValueError(f"reply misses ids {missing}")
    return out


def caption(targets: Sequence[CaptionRequest], captioner: VisionCaptioner,
            instruction: str = CAPTION_INSTRUCTION) -> list[CaptionTag]:
    """One tag per target, in input order. A malformed reply is retried once."""
    if not targets:
        raise ValueError("caption() needs at least one target")
    ids = [t.id for t in targets]
    raw = ""
    for _attempt in range(2):
        raw = captioner.describe(instruction, targets)
        try:
            parsed = _parse_reply(raw, ids)
            return [parsed[i] for i in ids]
        except (ValueError, json.JSONDecodeError) as exc:
            logger.warning("malformed captioner reply: %s", exc)
    return [CaptionTag("UI_ELEMENT", raw) for _ in targets]


def caption_concurrently(targets: Sequence[CaptionRequest], captioner: VisionCaptioner,
                         max_workers: int = 4) -> list[CaptionTag]:
    """Per-element requests issued in parallel, reassembled in input order."""
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        futures = [pool.submit(caption, [t], captioner) for t in targets]
        return [f.result()[0] for f in futures]


# --------------------------------------------------------------------------
# Full perception pass


@dataclass
class PerceptionStats:
    captioned: int = 0
    candidates: int = 0


@dataclass
class Perceiver:
    """Turns an observation into the actionable set the policy chooses from."""

    captioner: VisionCaptioner | None = None
    detector: HybridDetector = field(default_factory=HybridDetector)
    selective: bool = True
    iou_threshold: float = DEFAULT_IOU
    media_classes: Sequence[str] = DEFAULT_MEDIA_CLASSES
    stats: PerceptionStats = field(default_factory=PerceptionStats)
    _cache: dict = field(default_factory=dict, repr=False)

    def perceive(self, state: UiState) -> list[ActionableElement]:
        cached = self._cache.get(state.state_fingerprint)
        if cached is not None:
            return cached
        if state.rendering == "canvas":
            proposals = consolidate_regions(detect_regions(state, self.detector), (), self.iou_threshold)
            elements = normalize_canvas(state, proposals)
        else:
            elements = normalize_hierarchy(state)
        elements = self._enrich(state, elements)
        self._cache[state.state_fingerprint] = elements
        return elements

    def _enrich(self, state: UiState, elements: list[ActionableElement]) -> list[ActionableElement]:
        candidates = [e for e in elements if not e.is_global]
        self.stats.candidates += len(candidates)
        if self.captioner is None:
            return elements
        if self.selective:
            targets = [e for e in candidates if should_invoke_vlm(e, state.rendering, self.media_classes)]
        else:
            targets = candidates
        if not targets:
            return elements
        requests = [
            CaptionRequest(e.index, f"{state.state_fingerprint}#{e.index}", e.bounds, e, state)
            for e in targets
        ]
        tags = caption(requests, self.captioner)
        self.stats.captioned += len(targets)
        by_index = {e.index: tag for e, tag in zip(targets, tags)}
        return [replace(e, semantic_caption=by_index[e.index]) if e.index in by_index else e for e in elements]
