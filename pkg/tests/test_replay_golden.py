import re

from adscout.eval_harness.replay import replay_episode
from adscout.policy_engine import SECTION_TITLES
from adscout.utg import TransitionGraph
from tests.conftest import BUNDLES, GOLDENS, SEED_EXPERIENCES

SUMMARY = ("Interacting with navigation options that lead to external app suggestions often triggers "
           "advertisement displays.")


def run():
    return replay_episode(BUNDLES / "dict_loop.yaml", GOLDENS / "dict_loop_transcript.jsonl", SEED_EXPERIENCES)


def test_prompts_byte_exact():
    rep = run().report
    assert len(rep.prompts) == 2
    for i, prompt in enumerate(rep.prompts, 1):
        assert prompt.text == (GOLDENS / f"dict_loop_prompt_step{i}.txt").read_text()


def test_golden_prompt_structure():
    text = (GOLDENS / "dict_loop_prompt_step1.txt").read_text()
    lines = text.splitlines()
    assert lines[0] == "[System prompt.]" and "[Integrated prompt.]" in lines
    assert [t for t in lines if t in SECTION_TITLES] == list(SECTION_TITLES)
    assert re.search(r"^Current State\[[0-9a-f]{6}\] \(visited: \d+ times\), ad_score: \d\.\d\d$", text, re.M)
    assert re.search(r"^- State: \[[0-9a-f]{6}\], event: '.+', ad_score: \d\.\d\d \(visited: \d+ times\)$", text, re.M)
    assert "- Step 1 [" in text and "RestartAppEvent()" in text
    past = lines[lines.index(SECTION_TITLES[3]) + 1:]
    assert len(past) == 3 and all(p.startswith("- ") for p in past)
    assert "'More Apps' or 'Other App'" in past[0]


def test_episode_outcome_and_utg():
    result = run()
    rep = result.report
    assert rep.distinct_ads == ["play_redirect"] and rep.steps_taken == 2
    assert rep.termination_reason == "ad_budget"
    assert rep.experiences_added == 1 and result.store.entries[-1].summary == SUMMARY
    golden = TransitionGraph.load((GOLDENS / "dict_loop_utg.json").read_text())
    assert result.graph == golden
