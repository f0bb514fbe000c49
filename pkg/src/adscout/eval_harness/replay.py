"""Replay scenario for a single bundle: offline priors, seeded memory, recorded backend replies."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from adscout.app_model import load_bundle
from adscout.backends import ReplayBackend, Transcript
from adscout.eval_harness.campaign import load_experiences, prepare_knowledge
from adscout.memory import ExperienceStore
from adscout.navigator import Backends, EpisodeLimits, EpisodeReport, NavigatorConfig, run_episode
from adscout.perception import ScriptedCaptioner
from adscout.utg import TransitionGraph


@dataclass
class ReplayRun:
    report: EpisodeReport
    graph: TransitionGraph
    store: ExperienceStore


def replay_episode(bundle_path: str | Path, transcript: str | Path | Transcript, experiences: str | Path | None,
                   seed: int = 0, probe_budget: int = 50, limits: EpisodeLimits = EpisodeLimits(max_ads=1),
                   record_prompts: bool = True) -> ReplayRun:
    """Same wiring as ``adscout explore --backend replay``: decisions and summaries come from the transcript."""
    bundle = load_bundle(bundle_path)
    kb, graph = prepare_knowledge(bundle, probe_budget, seed)
    store = ExperienceStore()
    if experiences is not None:
        for exp in load_experiences(experiences):
            store.store(exp)
    if not isinstance(transcript, Transcript):
        transcript = Transcript.load(transcript)
    replay = ReplayBackend(transcript)
    backends = Backends(replay, ScriptedCaptioner(), replay)
    report = run_episode(bundle, kb, graph, store, backends, limits, seed,
                         NavigatorConfig(record_prompts=record_prompts), "mana")
    return ReplayRun(report, graph, store)
