"""Regenerate the dict_loop replay goldens: transcript (with request digests), prompts, final UTG.

Run after an intentional change to prompt rendering, then review the diff.
"""

from __future__ import annotations

import json
from pathlib import Path

from adscout.backends import RecordingBackend, ReplayBackend, Transcript
from adscout.eval_harness.campaign import load_experiences, prepare_knowledge
from adscout.app_model import load_bundle
from adscout.memory import ExperienceStore
from adscout.navigator import Backends, EpisodeLimits, NavigatorConfig, run_episode
from adscout.perception import ScriptedCaptioner

HERE = Path(__file__).parent
OUT = HERE / "goldens"

REPLIES = [
    ("decision", json.dumps({"reasoning": "Element 0 opens the navigation drawer, which may hide more options.",
                             "ad_score": 0.05, "choice": 0})),
    ("decision", json.dumps({"reasoning": "Element 1, 'Other App', looks like a cross-promotion entry.",
                             "ad_score": 0.05, "choice": 1})),
    ("summary", "Interacting with navigation options that lead to external app suggestions often triggers "
                "advertisement displays."),
]


def main() -> None:
    OUT.mkdir(exist_ok=True)
    bundle = load_bundle(HERE / "bundles" / "dict_loop.yaml")
    kb, graph = prepare_knowledge(bundle, 50, 0)
    store = ExperienceStore()
    for exp in load_experiences(HERE / "experiences" / "seed.jsonl"):
        store.store(exp)
    plain = Transcript([{"channel": c, "reply": r} for c, r in REPLIES])
    rec = RecordingBackend(ReplayBackend(plain), Transcript())
    report = run_episode(bundle, kb, graph, store, Backends(rec, ScriptedCaptioner(), rec),
                         EpisodeLimits(max_ads=1), 0, NavigatorConfig(record_prompts=True), "mana")
    assert report.distinct_ads and report.steps_taken == 2, report.to_dict()
    rec.transcript.save(OUT / "dict_loop_transcript.jsonl")
    for i, prompt in enumerate(report.prompts, 1):
        (OUT / f"dict_loop_prompt_step{i}.txt").write_text(prompt.text)
    (OUT / "dict_loop_utg.json").write_text(graph.export("json") + "\n")
    print(f"wrote {len(report.prompts)} prompts and {len(rec.transcript.records)} transcript records to {OUT}")


if __name__ == "__main__":
    main()
