"""Baseline policies and the implicit decision criterion."""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass, field
from typing import Callable, Sequence

from adscout.app_model import UiState
from adscout.perception import ActionableElement
from adscout.policy_engine import PromptContext, RenderedPrompt
from adscout.utg import TransitionGraph, describe_action

ADGPE_KEYWORDS = (
    "install now", "learn more", "ad", "ads", "sponsored", "download", "free", "offer", "promo",
    "more apps", "more games", "bonus", "reward", "gift",
)
CAPTION_GAIN = {"AD": 0.9, "POTENTIAL_AD": 0.6, "UI_ELEMENT": 0.1}

_CAMEL = re.compile(r"(?<=[a-z0-9])(?=[A-Z])")


def _element_text(el: ActionableElement) -> str:
    parts = [el.text or "", el.resource_id or "", _CAMEL.sub(" ", el.class_or_kind)]
    return " ".join(parts).lower().replace("_", " ")


def keyword_hits(el: ActionableElement, keywords: Sequence[str] = ADGPE_KEYWORDS) -> int:
    if el.is_global:
        return 0
    text = _element_text(el)
    return sum(1 for k in keywords if re.search(r"(?<![a-z0-9])" + re.escape(k) + r"(?![a-z0-9])", text))


def _rng(seed_or_rng) -> random.Random:
    return seed_or_rng if isinstance(seed_or_rng, random.Random) else random.Random(seed_or_rng)


def policy_random(state: UiState | None, x_t: Sequence[ActionableElement], seed) -> ActionableElement:
    if not x_t:
        raise ValueError("no actionable elements")
    return _rng(seed).choice(list(x_t))


def successor_visits(graph: TransitionGraph | None, state: UiState, el: ActionableElement) -> int | None:
    """Visits of the known successor of ``el``; None when the transition is unexplored."""
    if graph is None:
        return None
    succ = graph.successor_for(state.state_fingerprint, describe_action(state.state_fingerprint, el.action_key, state))
    return None if succ is None else succ.visits


def policy_bfs(state: UiState, graph: TransitionGraph | None, x_t: Sequence[ActionableElement]) -> ActionableElement:
    """Unexplored transitions first, then the least-visited successor; ties by index."""
    if not x_t:
        raise ValueError("no actionable elements")

    def key(el):
        v = successor_visits(graph, state, el)
        return (-1 if v is None else v, el.index)

    return min(x_t, key=key)


def policy_keyword(state: UiState | None, x_t: Sequence[ActionableElement], seed,
                   keywords: Sequence[str] = ADGPE_KEYWORDS) -> ActionableElement:
    """Most keyword hits wins, lower index on ties; uniform random when nothing matches."""
    if not x_t:
        raise ValueError("no actionable elements")
    best = max(x_t, key=lambda el: (keyword_hits(el, keywords), -el.index))
    if keyword_hits(best, keywords) == 0:
        return policy_random(state, x_t, seed)
    return best


@dataclass
class CriterionConfig:
    lam: float = 0.1
    r_sem_source: str = "scripted"  # "scripted" | "caption"
    caption_gain: dict = field(default_factory=lambda: dict(CAPTION_GAIN))

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")
        if self.r_sem_source not in ("scripted", "caption"):
            raise ValueError(f"unknown r_sem source {self.r_sem_source!r}")

    def r_sem(self, el: ActionableElement) -> float:
        if self.r_sem_source == "scripted":
            return el.semantic_gain if el.semantic_gain is not None else 0.0
        if el.semantic_caption is None:
            return self.caption_gain["UI_ELEMENT"]
        return self.caption_gain.get(el.semantic_caption.tag, self.caption_gain["UI_ELEMENT"])


def criterion_step_value(element: ActionableElement, r_sem: float, graph: TransitionGraph | None, lam: float,
                         state: UiState) -> float:
    if not 0.0 <= r_sem <= 1.0:
        raise ValueError("r_sem must lie in [0, 1]")
    visits = successor_visits(graph, state, element)
    return r_sem - lam * (visits or 0)


def policy_criterion(state: UiState, x_t: Sequence[ActionableElement], graph: TransitionGraph | None,
                     cfg: CriterionConfig) -> ActionableElement:
    """Argmax of ``r_sem - lam * N(successor)``; the lowest index wins ties."""
    if not x_t:
        raise ValueError("no actionable elements")
    best, best_val = None, float("-inf")
    for el in x_t:
        val = criterion_step_value(el, cfg.r_sem(el), graph, cfg.lam, state)
        if val > best_val + 1e-12:
            best, best_val = el, val
    return best


class PolicyBackend:
    """Adapts a context-level policy to the decision port used by the navigator."""

    needs_prompt_text = False

    def __init__(self, name: str, choose: Callable[[PromptContext], ActionableElement]):
        self.name = name
        self._choose = choose
        self.calls = 0

    def complete_prompt(self, prompt: RenderedPrompt) -> str:
        self.calls += 1
        ctx = prompt.context
        el = self._choose(ctx)
        score = ctx.neighborhood.center.score if ctx.neighborhood is not None else 0.0
        return json.dumps({"reasoning": f"{self.name} picked {el.index}", "ad_score": score, "choice": el.index})

    def complete(self, system: str, user: str) -> str:
        raise NotImplementedError("policy backends read the structured context")


def make_policy(name: str, seed: int = 0, criterion: CriterionConfig | None = None) -> PolicyBackend:
    rng = random.Random(seed)
    if name == "random":
        return PolicyBackend(name, lambda ctx: policy_random(ctx.state, ctx.elements, rng))
    if name == "bfs":
        return PolicyBackend(name, lambda ctx: policy_bfs(ctx.state, ctx.graph, ctx.elements))
    if name == "keyword":
        return PolicyBackend(name, lambda ctx: policy_keyword(ctx.state, ctx.elements, rng))
    if name == "criterion":
        cfg = criterion or CriterionConfig()
        return PolicyBackend(name, lambda ctx: policy_criterion(ctx.state, ctx.elements, ctx.graph, cfg))
    if name == "index":
        return PolicyBackend(name, lambda ctx: ctx.elements[0])
    raise ValueError(f"unknown policy {name!r}")


BASELINES = ("random", "bfs", "keyword")
