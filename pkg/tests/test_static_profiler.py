import json

import pytest
from hypothesis import given, strategies as st

from adscout.app_model import load_bundle
from adscout.static_profiler import (UNATTRIBUTED, PriorKnowledgeBase, build_knowledge_base, default_config,
                                     extract_trigger_prior, importance_rank, profile_bundle)
from tests.conftest import BUNDLES, EXPECTED


def _profile(name):
    screen, slot, trigger = profile_bundle(load_bundle(BUNDLES / f"{name}.yaml"), default_config())
    return {"screen": screen.to_dict(), "slot": slot.to_dict(), "trigger": trigger.to_dict()}


@pytest.mark.parametrize("name", sorted(p.stem for p in BUNDLES.glob("*.yaml")))
def test_priors_match_expected(name):
    expected = json.loads((EXPECTED / f"{name}.json").read_text())
    assert _profile(name) == expected


def test_two_hop_superclass_attribution():
    trig = _profile("superclass_chain")["trigger"]["methods_by_activity"]
    assert [m for m, _ in trig["ResultActivity"]] == ["onDoubleReward", "prepare"]


def test_helper_without_activity_is_unattributed():
    trig = _profile("canvas_game")["trigger"]["methods_by_activity"]
    assert trig[UNATTRIBUTED] == [["showInterstitial", 3]]


def test_no_ad_bundle_has_empty_priors():
    screen, slot, trigger = profile_bundle(load_bundle(BUNDLES / "no_ad.yaml"), default_config())
    assert screen.empty and slot.empty and trigger.empty


@pytest.mark.parametrize("api, rank", [
    ("com.x.InterstitialAd.show", 3), ("RewardedAd.showAd", 3), ("AdLoader.loadAd", 2),
    ("MobileAds.initialize", 1), ("AdView.setAdSize", 1),
])
def test_importance_rank_examples(api, rank):
    assert importance_rank(api) == rank


@given(st.text(alphabet="abcdefghijklmnopqrstuvwxyzABCDEFGHIJ.", min_size=1, max_size=30))
def test_importance_rank_range(name):
    assert importance_rank(name) in (1, 2, 3)


def test_trigger_entries_sorted_by_rank():
    for path in BUNDLES.glob("*.yaml"):
        prior = extract_trigger_prior(load_bundle(path), default_config())
        for entries in prior.methods_by_activity.values():
            ranks = [e.importance_rank for e in entries]
            assert ranks == sorted(ranks, reverse=True)


def test_knowledge_base_round_trip():
    bundle = load_bundle(BUNDLES / "dict_loop.yaml")
    kb = build_knowledge_base(*profile_bundle(bundle, default_config()))
    again = PriorKnowledgeBase.from_dict(json.loads(json.dumps(kb.to_dict())))
    assert again.to_dict() == kb.to_dict()
    assert kb.libraries == ["Google AdMob"]
    assert kb.slot_for_resource("com.picolina.aymane.serhani:id/adView") is not None
