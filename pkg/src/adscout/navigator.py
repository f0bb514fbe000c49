"""Online exploration loop: success check, recovery, perception, reasoning, update."""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

from adscout.app_model import LAUNCHER_ACTIVITY, AppBundle, Session, StepOutcome, UiState, pseudo_state
from adscout.memory import ExperienceStore, TrajectoryStep, summarize_trajectory
from adscout.perception import Perceiver, VisionCaptioner
from adscout.policy_engine import (
    DEFAULT_HOPS,
    DEFAULT_K,
    EpisodeAbort,
    HistoryLine,
    RenderedPrompt,
    build_context,
    decide,
    render_prompt,
)
from adscout.static_profiler import PriorKnowledgeBase
from adscout.utg import DEFAULT_ALPHA, TransitionGraph, describe_action

logger = logging.getLogger(__name__)

DEFAULT_K_BASE = 5
RESTART_EVENT = describe_action("", "restart")
ACTIVITY_AD_PREFIX = "activity:"


# --------------------------------------------------------------------------
# History


def adaptive_window(recent_states: Sequence[str], k_base: int = DEFAULT_K_BASE) -> int:
    """``ceil(1.5 * k_base)`` when the recent states hold at most two distinct values, else ``k_base``."""
    if k_base < 1:
        raise ValueError("k_base must be >= 1")
    return math.ceil(1.5 * k_base) if len(set(recent_states)) <= 2 else k_base


@dataclass(frozen=True)
class HistoryEntry:
    step: int
    obs: str
    action: str
    next_obs: str
    ad_flag: bool
    timestamp: float

    def line(self) -> HistoryLine:
        return HistoryLine(self.step, self.obs, self.next_obs, self.action)


@dataclass
class HistoryBuffer:
    k_base: int = DEFAULT_K_BASE
    capacity: int = 256
    entries: list[HistoryEntry] = field(default_factory=list)

    def __post_init__(self):
        if self.k_base < 1:
            raise ValueError("k_base must be >= 1")

    def add(self, obs: str, action: str, next_obs: str, ad_flag: bool, timestamp: float) -> HistoryEntry:
        if self.entries and timestamp < self.entries[-1].timestamp:
            raise ValueError("history entries must be time-ordered")
        step = self.entries[-1].step + 1 if self.entries else 1
        entry = HistoryEntry(step, obs, action, next_obs, ad_flag, timestamp)
        self.entries.append(entry)
        if len(self.entries) > self.capacity:
            del self.entries[: len(self.entries) - self.capacity]
        return entry

    @property
    def current_window(self) -> int:
        recent = [e.next_obs for e in self.entries[-self.k_base:]]
        return adaptive_window(recent, self.k_base)

    def window(self) -> list[HistoryEntry]:
        return self.entries[-self.current_window:] if self.entries else []

    def lines(self) -> list[HistoryLine]:
        return [e.line() for e in self.window()]


# --------------------------------------------------------------------------
# Limits and reports


@dataclass(frozen=True)
class EpisodeLimits:
    max_steps: int = 60
    max_seconds: float = 300.0
    event_interval_seconds: float = 5.0
    max_ads: int | None = None
    wall_clock: bool = False

    def __post_init__(self):
        if self.max_steps <= 0 or self.max_seconds <= 0 or self.event_interval_seconds <= 0:
            raise ValueError("episode limits must be positive")
        if self.max_ads is not None and self.max_ads < 1:
            raise ValueError("max_ads must be >= 1 when set")


TERMINATION_REASONS = ("ad_budget", "step_budget", "time_budget", "abort")


@dataclass
class EpisodeReport:
    app_id: str
    seed: int
    policy: str = ""
    distinct_ads: list[str] = field(default_factory=list)
    steps_taken: int = 0
    steps_to_each_ad: list[int] = field(default_factory=list)
    trajectory: list[dict] = field(default_factory=list)
    termination_reason: str = ""
    experiences_added: int = 0
    captioned: int = 0
    prompts: list[RenderedPrompt] = field(default_factory=list, repr=False)
    history_windows: list[list[HistoryLine]] = field(default_factory=list, repr=False)
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "app_id": self.app_id,
            "seed": self.seed,
            "policy": self.policy,
            "distinct_ads": list(self.distinct_ads),
            "steps_taken": self.steps_taken,
            "steps_to_each_ad": list(self.steps_to_each_ad),
            "termination_reason": self.termination_reason,
            "experiences_added": self.experiences_added,
            "captioned": self.captioned,
            "trajectory": self.trajectory,
            "error": self.error,
        }

    def log_lines(self) -> str:
        return "".join(json.dumps(rec, sort_keys=True) + "\n" for rec in self.trajectory)


# --------------------------------------------------------------------------
# Success and recovery


def detect_success(outcome: StepOutcome, kb: PriorKnowledgeBase | None, seen_ads: set[str]) -> str | None:
    """New ad id from the exposure flag or a success-activity arrival; repeats return None."""
    candidates = []
    if outcome.ad_exposed:
        candidates.append(outcome.ad_exposed)
    if kb is not None and outcome.next.activity in kb.success_activities:
        candidates.append(ACTIVITY_AD_PREFIX + outcome.next.activity)
    for ad in candidates:
        if ad not in seen_ads:
            seen_ads.add(ad)
            return ad
    return None


def recover(session: Session, outcome: StepOutcome) -> str | None:
    """Restart after a crash, press back when backgrounded; otherwise do nothing."""
    if outcome.crashed:
        session.step("restart")
        if session.crashed:
            raise EpisodeAbort("restart failed to revive the app")
        return "restart"
    if outcome.backgrounded:
        session.step("back")
        return "back"
    return None


def ground_truth_ads(bundle: AppBundle) -> list[str]:
    ads = list(bundle.ad_ids)
    ads += [ACTIVITY_AD_PREFIX + a for a in bundle.manifest.registered_success_activities]
    return ads


# --------------------------------------------------------------------------
# Episode


@dataclass
class Backends:
    decision: Any
    captioner: VisionCaptioner | None = None
    summarizer: Any = None
    selective_vision: bool = True


@dataclass
class NavigatorConfig:
    alpha: float = DEFAULT_ALPHA
    k_base: int = DEFAULT_K_BASE
    k_retrieve: int = DEFAULT_K
    hops: int = DEFAULT_HOPS
    record_prompts: bool = False
    store_experiences: bool = True


def _ad_type(bundle: AppBundle, ad_id: str) -> str | None:
    for trig in bundle.behavior.ad_triggers:
        if trig.ad_id == ad_id:
            return trig.ad_type
    return None


def run_episode(bundle: AppBundle, kb: PriorKnowledgeBase | None, graph: TransitionGraph | None,
                store: ExperienceStore | None, backends: Backends, limits: EpisodeLimits = EpisodeLimits(),
                seed: int = 0, config: NavigatorConfig | None = None, policy_name: str = "") -> EpisodeReport:
    cfg = config or NavigatorConfig()
    graph = graph if graph is not None else TransitionGraph()
    session = Session(bundle, seed, limits.event_interval_seconds)
    perceiver = Perceiver(backends.captioner, selective=backends.selective_vision)
    history = HistoryBuffer(cfg.k_base)
    report = EpisodeReport(bundle.app_id, seed, policy_name)
    seen: set[str] = set()
    started = time.monotonic()
    launcher = pseudo_state(LAUNCHER_ACTIVITY)
    wants_text = getattr(backends.decision, "needs_prompt_text", True)

    def launch() -> UiState:
        st = session.observe()
        graph.record_transition(launcher, RESTART_EVENT, st)
        history.add(launcher.state_fingerprint, RESTART_EVENT, st.state_fingerprint, False, session.clock)
        return st

    def elapsed() -> float:
        return time.monotonic() - started if limits.wall_clock else session.clock

    state = launch()
    trajectory: list[TrajectoryStep] = []
    since_last = 0

    while True:
        if report.steps_taken >= limits.max_steps:
            report.termination_reason = "step_budget"
            break
        if limits.max_ads is not None and len(report.distinct_ads) >= limits.max_ads:
            report.termination_reason = "ad_budget"
            break
        if elapsed() >= limits.max_seconds:
            report.termination_reason = "time_budget"
            break

        # perception
        elements = perceiver.perceive(state)
        # reasoning
        ctx = build_context(state, elements, graph, history.lines(), store, kb, cfg.k_retrieve, cfg.hops)
        prompt = render_prompt(ctx) if wants_text else RenderedPrompt("", "", len(elements), ctx)
        if cfg.record_prompts:
            report.prompts.append(prompt)
            report.history_windows.append(list(ctx.history))
        try:
            decision = decide(prompt, backends.decision)
        except EpisodeAbort as exc:
            report.termination_reason = "abort"
            report.error = str(exc)
            logger.warning("episode %s/%d aborted: %s", bundle.app_id, seed, exc)
            break
        el = elements[decision.choice]
        event = describe_action(state.state_fingerprint, el.action_key, state)
        outcome = session.step(el.action_key)
        report.steps_taken += 1
        since_last += 1

        # state update
        nxt = outcome.next
        history.add(state.state_fingerprint, event, nxt.state_fingerprint, outcome.ad_exposed is not None,
                    session.clock)
        graph.record_transition(state, event, nxt)
        graph.update_score(state.state_fingerprint, decision.ad_score, cfg.alpha)
        widget_text = el.text or (el.semantic_caption.description if el.semantic_caption else None)
        trajectory.append(TrajectoryStep(event, el.class_or_kind, widget_text))

        # success check
        ad = detect_success(outcome, kb, seen)
        report.trajectory.append({
            "step": report.steps_taken, "state": state.state_fingerprint, "activity": state.activity,
            "choice": decision.choice, "action": el.action_key, "event": event, "ad_score": decision.ad_score,
            "reasoning": decision.reasoning, "fallback": decision.fallback, "next": nxt.state_fingerprint,
            "ad": ad, "clock": session.clock, "window": history.current_window,
        })
        if ad is not None:
            report.distinct_ads.append(ad)
            report.steps_to_each_ad.append(since_last)
            since_last = 0
            if store is not None and cfg.store_experiences:
                summary = summarize_trajectory(trajectory, backends.summarizer, _ad_type(bundle, ad))
                store.store(store.make_experience(
                    state, summary, bundle.app_id,
                    [(s.action, s.widget_descriptor()) for s in trajectory], created_at=time.time(),
                ))
                report.experiences_added += 1
            logger.info("%s seed=%d: found %s after %d steps", bundle.app_id, seed, ad, report.steps_to_each_ad[-1])
            if report.steps_taken < limits.max_steps and (limits.max_ads is None or len(seen) < limits.max_ads):
                session.step("restart")
                trajectory = []
                state = launch()
            continue

        # recovery
        try:
            taken = recover(session, outcome)
        except EpisodeAbort as exc:
            report.termination_reason = "abort"
            report.error = str(exc)
            break
        if taken is not None:
            if taken == "restart":
                trajectory = []
                state = launch()
                continue
            after = session.observe()
            back_event = describe_action(nxt.state_fingerprint, "back", nxt)
            graph.record_transition(nxt, back_event, after)
            history.add(nxt.state_fingerprint, back_event, after.state_fingerprint, False, session.clock)
            state = after
            continue
        state = nxt

    report.captioned = perceiver.stats.captioned
    return report


# --------------------------------------------------------------------------
# Metrics


@dataclass(frozen=True)
class Metrics:
    detection_rate: float
    avg_steps: float | None
    found: int
    total: int

    def to_dict(self) -> dict:
        return {"detection_rate": self.detection_rate, "avg_steps": self.avg_steps,
                "found": self.found, "total": self.total}


def compute_metrics(reports: Sequence[EpisodeReport], ground_truth: Mapping[str, Sequence[str]]) -> Metrics:
    """Detection rate over all (report, ground-truth ad) pairs; mean steps over every discovery."""
    if not reports:
        raise ValueError("compute_metrics needs at least one report")
    found = total = 0
    steps: list[int] = []
    for rep in reports:
        truth = set(ground_truth[rep.app_id])
        total += len(truth)
        for ad, n in zip(rep.distinct_ads, rep.steps_to_each_ad):
            if ad in truth:
                found += 1
                steps.append(n)
    rate = found / total if total else 0.0
    return Metrics(rate, sum(steps) / len(steps) if steps else None, found, total)
