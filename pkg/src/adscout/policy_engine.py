"""Decision context, prompt rendering and decision parsing."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Any, Protocol, Sequence

from adscout.app_model import UiState
from adscout.memory import Experience, ExperienceStore
from adscout.perception import ActionableElement
from adscout.static_profiler import PriorKnowledgeBase
from adscout.utg import Neighborhood, TransitionGraph, describe_action

logger = logging.getLogger(__name__)

SECTION_TITLES = (
    "1. Current Screen Options",
    "2. Static App Knowledge",
    "3. Strategic Context",
    "4. Past Experiences",
)
EMPTY = "(none)"
DEFAULT_K = 3
DEFAULT_HOPS = 2

SYSTEM_PROMPT = (
    "You are an agent designed to explore an Android app and trigger the advertisements it contains. "
    "At each step you receive the actionable elements of the current screen, offline knowledge about "
    "the app's ad integration, a local map of explored screens with their ad scores, the recent "
    "interaction history, and heuristics distilled from other apps. Pick exactly one element. "
    'Reply with a JSON object {"reasoning": string, "ad_score": number in [0, 1], "choice": integer}, '
    "where ad_score estimates how likely the current screen leads to an advertisement."
)

CORRECTION = (
    "Your previous reply was invalid: {error}. Reply again with only a JSON object "
    '{{"reasoning": string, "ad_score": number in [0, 1], "choice": integer between 0 and {last}}}.'
)


@dataclass(frozen=True)
class HistoryLine:
    step: int
    src: str
    dst: str
    event: str

    def render(self) -> str:
        return f"- Step {self.step} [{self.src}] -> [{self.dst}] {self.event}"


@dataclass
class PromptContext:
    """Everything the policy sees at one step (metadata, captions, priors, history, memory, map)."""

    elements: list[ActionableElement] = field(default_factory=list)
    activity: str = ""
    state_id: str = ""
    knowledge: list[str] = field(default_factory=list)
    history: list[HistoryLine] = field(default_factory=list)
    experiences: list[tuple[Experience, float]] = field(default_factory=list)
    neighborhood: Neighborhood | None = None
    # not rendered; consumed by scripted oracles and the fallback rule
    state: UiState | None = field(default=None, repr=False)
    graph: TransitionGraph | None = field(default=None, repr=False)
    kb: PriorKnowledgeBase | None = field(default=None, repr=False)

    def __post_init__(self):
        for i, el in enumerate(self.elements):
            if el.index != i:
                raise ValueError("element indices must be contiguous from 0")

    @property
    def captions(self) -> dict[int, Any]:
        return {e.index: e.semantic_caption for e in self.elements if e.semantic_caption is not None}


@dataclass(frozen=True)
class RenderedPrompt:
    system: str
    integrated: str
    n_options: int
    context: PromptContext | None = field(default=None, compare=False, repr=False)

    @property
    def text(self) -> str:
        return f"[System prompt.]\n{self.system}\n[Integrated prompt.]\n{self.integrated}"


@dataclass(frozen=True)
class Decision:
    choice: int
    ad_score: float
    reasoning: str
    fallback: bool = False

    def to_dict(self) -> dict:
        return {"choice": self.choice, "ad_score": self.ad_score, "reasoning": self.reasoning,
                "fallback": self.fallback}


class DecisionBackend(Protocol):
    def complete(self, system: str, user: str) -> str: ...


class DecisionParseError(ValueError):
    pass


class BackendUnavailable(RuntimeError):
    """Transport failure after the backend's own retries."""


class EpisodeAbort(RuntimeError):
    pass


# --------------------------------------------------------------------------
# Context


def knowledge_lines(kb: PriorKnowledgeBase | None, state: UiState) -> list[str]:
    if kb is None:
        return []
    lines = []
    activity = state.activity
    if kb.is_ad_activity(activity):
        lines.append(f"[Activity Match] Current activity '{activity}' is listed as ad-related.")
    methods = kb.methods(activity)
    if methods:
        lines.append(f"[Activity Match] This activity contains potential ad trigger(s) in method(s): {methods!r}.")
    seen = set()
    for w in state.widgets:
        if w.resource_id and w.resource_id not in seen and kb.slot_for_resource(w.resource_id) is not None:
            seen.add(w.resource_id)
            lines.append(f"[Component Match] A component with resource_id '{w.resource_id}' is a known ad container.")
    for link in kb.linked_actions(state.state_fingerprint):
        lines.append(f"[Network Match] Action '{link['action']}' on this screen was followed by ad traffic "
                     f"to '{link['url']}' after {link['lag']:.1f}s.")
    if kb.libraries:
        lines.append(f"[General Info] App uses ad libraries: {list(kb.libraries)!r}")
    return lines


def build_context(state: UiState, elements: Sequence[ActionableElement], graph: TransitionGraph,
                  history: Sequence[HistoryLine], store: ExperienceStore | None, kb: PriorKnowledgeBase | None,
                  k: int = DEFAULT_K, hops: int = DEFAULT_HOPS) -> PromptContext:
    graph.add_state(state)
    experiences = store.retrieve(state, k) if store is not None and len(store) else []
    return PromptContext(
        elements=list(elements),
        activity=state.activity,
        state_id=state.state_fingerprint,
        knowledge=knowledge_lines(kb, state),
        history=list(history),
        experiences=experiences,
        neighborhood=graph.neighborhood(state.state_fingerprint, hops),
        state=state,
        graph=graph,
        kb=kb,
    )


# --------------------------------------------------------------------------
# Rendering


def _q(text: str) -> str:
    return " ".join(text.split())


def option_line(el: ActionableElement) -> str:
    parts = [p for p in (el.text, el.semantic_caption.render() if el.semantic_caption else None) if p]
    text = _q(" ".join(parts)) if parts else None
    if el.source == "region":
        return f"- View {el.index}, Text='{text or 'N/A'}'"
    fields = [f"Type='{el.class_or_kind}'"]
    if text or not el.resource_id:
        fields.append(f"Text='{text or 'N/A'}'")
    if el.resource_id:
        fields.append(f"Res-ID='{el.resource_id}'")
    return f"- View {el.index}: " + ", ".join(fields)


def _map_lines(hood: Neighborhood) -> list[str]:
    c = hood.center
    lines = [f"Current State[{c.id}] (visited: {c.visits} times), ad_score: {c.score:.2f}"]
    dist = {c.id: 0}
    dist.update({n.id: h for h, n, _ in hood.layers})
    nodes = {c.id: c, **{n.id: n for _, n, _ in hood.layers}}
    max_h = max(dist.values())
    for h in range(1, max_h + 1):
        edges = sorted((e for e in hood.edges if dist.get(e.src) == h - 1 and dist.get(e.dst) == h),
                       key=lambda e: (e.dst, e.src, e.event))
        if not edges:
            continue
        lines.append(f"**Reachable in {h}-hop(s):**")
        for e in edges:
            n = nodes[e.dst]
            lines.append(f"- State: [{n.id}], event: '{e.event}', ad_score: {n.score:.2f} (visited: {n.visits} times)")
    return lines


def render_prompt(ctx: PromptContext, system: str = SYSTEM_PROMPT) -> RenderedPrompt:
    out = [SECTION_TITLES[0]]
    out += [option_line(el) for el in ctx.elements] or [EMPTY]
    out.append(SECTION_TITLES[1])
    out += ctx.knowledge or [EMPTY]
    out.append(SECTION_TITLES[2])
    out.append("(a) Annotated Local Map (from UTG, 2-hop neighborhood)")
    out += _map_lines(ctx.neighborhood) if ctx.neighborhood is not None else [EMPTY]
    out.append("(b) Recent History")
    out += [h.render() for h in ctx.history] or [EMPTY]
    out.append(SECTION_TITLES[3])
    out += [f"- {_q(exp.summary)}" for exp, _ in ctx.experiences] or [EMPTY]
    integrated = "\n".join(out) + "\n"
    check_sections(integrated)
    return RenderedPrompt(system, integrated, len(ctx.elements), ctx)


def check_sections(integrated: str) -> None:
    """Each section title must appear exactly once, in order, on its own line."""
    lines = integrated.splitlines()
    positions = []
    for title in SECTION_TITLES:
        hits = [i for i, ln in enumerate(lines) if ln == title]
        if len(hits) != 1:
            raise AssertionError(f"section '{title}' appears {len(hits)} times")
        positions.append(hits[0])
    if positions != sorted(positions):
        raise AssertionError("prompt sections out of order")


# --------------------------------------------------------------------------
# Parsing and deciding


def parse_decision(raw_text: str) -> Decision:
    """Extract the first JSON object carrying a ``choice`` key, ignoring surrounding prose."""
    if not raw_text or not raw_text.strip():
        raise DecisionParseError("empty reply")
    decoder = json.JSONDecoder()
    pos = raw_text.find("{")
    while pos >= 0:
        try:
            obj, _ = decoder.raw_decode(raw_text, pos)
        except json.JSONDecodeError:
            obj = None
        if isinstance(obj, dict) and "choice" in obj:
            return _coerce(obj)
        pos = raw_text.find("{", pos + 1)
    raise DecisionParseError("no decision object in reply")


def _coerce(obj: dict) -> Decision:
    choice = obj.get("choice")
    if isinstance(choice, bool) or not isinstance(choice, (int, float, str)):
        raise DecisionParseError(f"choice must be an integer, got {choice!r}")
    try:
        choice_f = float(choice)
    except ValueError as exc:
        raise DecisionParseError(f"choice must be an integer, got {choice!r}") from exc
    if not choice_f.is_integer():
        raise DecisionParseError(f"choice must be an integer, got {choice!r}")
    score = obj.get("ad_score", None)
    if isinstance(score, bool) or not isinstance(score, (int, float, str)):
        raise DecisionParseError(f"ad_score must be a number, got {score!r}")
    try:
        score_f = float(score)
    except ValueError as exc:
        raise DecisionParseError(f"ad_score must be a number, got {score!r}") from exc
    return Decision(int(choice_f), score_f, str(obj.get("reasoning", "")))


def validate(decision: Decision, n_options: int) -> None:
    if not 0 <= decision.choice < n_options:
        raise DecisionParseError(f"choice {decision.choice} is outside 0..{n_options - 1}")
    if not 0.0 <= decision.ad_score <= 1.0:
        raise DecisionParseError(f"ad_score {decision.ad_score} is outside [0, 1]")


def successor_visits(ctx: PromptContext, el: ActionableElement) -> int:
    if ctx.graph is None or ctx.state is None:
        return 0
    event = describe_action(ctx.state_id, el.action_key, ctx.state)
    succ = ctx.graph.successor_for(ctx.state_id, event)
    return succ.visits if succ is not None else 0


def fallback_decision(ctx: PromptContext | None, n_options: int) -> Decision:
    """Least-visited known successor (unknown counts as unvisited); ties by index."""
    score = 0.0
    choice = 0
    if ctx is not None and ctx.elements:
        choice = min(ctx.elements, key=lambda el: (successor_visits(ctx, el), el.index)).index
        if ctx.neighborhood is not None:
            score = ctx.neighborhood.center.score
    return Decision(min(choice, max(n_options - 1, 0)), score, "fallback: least-visited successor", True)


def _ask(backend, prompt: RenderedPrompt, user: str) -> str:
    # structured backends (scripted oracles) read the context instead of the text
    if hasattr(backend, "complete_prompt"):
        return backend.complete_prompt(prompt)
    return backend.complete(prompt.system, user)


def decide(prompt: RenderedPrompt, backend: DecisionBackend) -> Decision:
    if prompt.n_options < 1:
        raise ValueError("cannot decide without options")
    user = prompt.integrated
    for attempt in range(2):
        try:
            raw = _ask(backend, prompt, user)
        except BackendUnavailable as exc:
            raise EpisodeAbort(f"decision backend unavailable: {exc}") from exc
        try:
            decision = parse_decision(raw)
            validate(decision, prompt.n_options)
            return decision
        except DecisionParseError as exc:
            logger.warning("invalid decision (attempt %d): %s", attempt + 1, exc)
            user = prompt.integrated + "\n" + CORRECTION.format(error=exc, last=prompt.n_options - 1)
    return fallback_decision(prompt.context, prompt.n_options)
