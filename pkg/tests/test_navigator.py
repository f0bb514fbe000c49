import math

import pytest
from hypothesis import given, strategies as st

from adscout.app_model import load_bundle
from adscout.backends import OracleSummarizer, ScriptedOracle
from adscout.memory import ExperienceStore
from adscout.navigator import (Backends, EpisodeLimits, EpisodeReport, HistoryBuffer, NavigatorConfig,
                               adaptive_window, compute_metrics, ground_truth_ads, run_episode)
from adscout.perception import ScriptedCaptioner
from adscout.static_profiler import PriorKnowledgeBase
from adscout.utg import TransitionGraph
from tests.conftest import BUNDLES


def window_oracle(states, k_base):
    distinct = len(set(states))
    return int(math.ceil(1.5 * k_base)) if distinct <= 2 else k_base


def test_adaptive_window_grid():
    for k_base in range(1, 11):
        for distinct in range(1, k_base + 1):
            states = [f"s{i % distinct}" for i in range(k_base)]
            want = (3 * k_base + 1) // 2 if distinct <= 2 else k_base
            assert adaptive_window(states, k_base) == want == window_oracle(states, k_base)


@given(st.lists(st.sampled_from("abcdef"), max_size=12), st.integers(1, 10))
def test_adaptive_window_values(states, k_base):
    assert adaptive_window(states, k_base) in (k_base, math.ceil(1.5 * k_base))


def test_adaptive_window_rejects_bad_base():
    with pytest.raises(ValueError):
        adaptive_window([], 0)


def test_history_buffer_widens_on_loops():
    h = HistoryBuffer(k_base=4)
    for t in range(10):
        h.add("a", "e", "ab"[t % 2], False, float(t))
    assert h.current_window == 6 and len(h.window()) == 6
    for t in range(10, 14):
        h.add("a", "e", f"n{t}", False, float(t))
    assert h.current_window == 4
    with pytest.raises(ValueError):
        h.add("a", "e", "b", False, 0.0)


def mana_backends():
    return Backends(ScriptedOracle(), ScriptedCaptioner(), OracleSummarizer())


def test_tiny_app_finds_popup_and_stores_experience(tiny_bundle):
    store = ExperienceStore()
    rep = run_episode(tiny_bundle, None, TransitionGraph(), store, mana_backends(), EpisodeLimits(max_ads=1))
    assert rep.distinct_ads == ["shop_popup"] and rep.steps_to_each_ad == [1]
    assert rep.termination_reason == "ad_budget"
    assert len(store) == 1 and store.entries[0].summary.startswith("Interacting with 'Free Coins'")


def test_no_ad_runs_to_step_budget():
    bundle = load_bundle(BUNDLES / "no_ad.yaml")
    rep = run_episode(bundle, None, TransitionGraph(), None, mana_backends(),
                      EpisodeLimits(max_steps=60, max_seconds=1e9))
    assert rep.steps_taken == 60 and rep.termination_reason == "step_budget" and not rep.distinct_ads


def test_time_budget():
    bundle = load_bundle(BUNDLES / "no_ad.yaml")
    rep = run_episode(bundle, None, TransitionGraph(), None, mana_backends(),
                      EpisodeLimits(max_steps=60, max_seconds=50, event_interval_seconds=5))
    assert rep.termination_reason == "time_budget"
    assert rep.steps_taken <= 10


def test_crash_recovery_continues(tiny_bundle):
    class AlwaysBoom:
        def complete(self, system, user):
            return '{"choice": 2, "ad_score": 0.0}'

    rep = run_episode(tiny_bundle, None, TransitionGraph(), None, Backends(AlwaysBoom()),
                      EpisodeLimits(max_steps=5, max_seconds=1e9))
    assert rep.steps_taken == 5 and rep.termination_reason == "step_budget"
    assert all(r["activity"] == "MainActivity" for r in rep.trajectory)


def test_success_activity_counts_as_ad():
    bundle = load_bundle(BUNDLES / "success_activity.yaml")
    kb = PriorKnowledgeBase(success_activities=list(bundle.manifest.registered_success_activities))
    rep = run_episode(bundle, kb, TransitionGraph(), None, mana_backends(), EpisodeLimits())
    assert any(ad.startswith("activity:") for ad in rep.distinct_ads)
    assert set(rep.distinct_ads) <= set(ground_truth_ads(bundle))


def test_episode_is_deterministic():
    bundle = load_bundle(BUNDLES / "fitness.yaml")
    a = run_episode(bundle, None, TransitionGraph(), None, mana_backends(), EpisodeLimits(), seed=3)
    b = run_episode(bundle, None, TransitionGraph(), None, mana_backends(), EpisodeLimits(), seed=3)
    assert a.to_dict() == b.to_dict()


def test_scores_stay_bounded_and_visits_grow():
    bundle = load_bundle(BUNDLES / "news_reader.yaml")
    graph = TransitionGraph()
    rep = run_episode(bundle, None, graph, None, mana_backends(), EpisodeLimits())
    assert all(0.0 <= n.score <= 1.0 for n in graph.nodes.values())
    assert sum(n.visits for n in graph.nodes.values()) >= rep.steps_taken


def test_limits_validation():
    with pytest.raises(ValueError):
        EpisodeLimits(max_steps=0)
    with pytest.raises(ValueError):
        EpisodeLimits(max_ads=0)


def test_compute_metrics_hand_case():
    truth = {"a": ["x", "y"], "b": ["z"]}
    reps = [EpisodeReport("a", 0, distinct_ads=["x"], steps_to_each_ad=[4]),
            EpisodeReport("b", 0, distinct_ads=["z", "bogus"], steps_to_each_ad=[2, 9])]
    m = compute_metrics(reps, truth)
    assert (m.found, m.total) == (2, 3)
    assert m.detection_rate == pytest.approx(2 / 3) and m.avg_steps == 3.0
    with pytest.raises(ValueError):
        compute_metrics([], truth)


def test_record_prompts_flag(tiny_bundle):
    rep = run_episode(tiny_bundle, None, TransitionGraph(), None, mana_backends(), EpisodeLimits(max_steps=3),
                      config=NavigatorConfig(record_prompts=True))
    assert len(rep.prompts) == rep.steps_taken
    assert len(rep.history_windows) == rep.steps_taken
