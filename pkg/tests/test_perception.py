import json

import pytest
from hypothesis import given, strategies as st

from adscout.app_model import bundle_from_dict, load_bundle, reset
from adscout.perception import (CaptionRequest, CaptionTag, GridHeuristicAnalyzer, HybridDetector, Perceiver,
                                RegionProposal, ScriptedCaptioner, SimulatedDeepDetector, caption,
                                caption_concurrently, consolidate_regions, iou, normalize_hierarchy,
                                parse_caption, should_invoke_vlm)
from tests.conftest import BUNDLES

coord = st.integers(0, 1000)


@st.composite
def rects(draw):
    l, t = draw(coord), draw(coord)
    return (l, t, l + draw(st.integers(1, 300)), t + draw(st.integers(1, 300)))


@given(rects(), rects())
def test_iou_symmetric_and_bounded(a, b):
    assert iou(a, b) == pytest.approx(iou(b, a))
    assert 0.0 <= iou(a, b) <= 1.0
    assert iou(a, a) == 1.0


def test_iou_hand_case():
    # 50x100 overlap of two 100x100 boxes: 5000 / 15000
    assert iou((0, 0, 100, 100), (50, 0, 150, 100)) == pytest.approx(1 / 3)


@given(st.lists(rects(), max_size=15), st.floats(0.1, 1.0))
def test_consolidated_boxes_do_not_overlap(boxes, thr):
    props = [RegionProposal(b, 0.5 + 0.03 * i % 0.5, "deep_detector") for i, b in enumerate(boxes)]
    kept = consolidate_regions(props, (), thr)
    for i, a in enumerate(kept):
        for b in kept[i + 1:]:
            assert iou(a.bounds, b.bounds) < thr
    # every dropped proposal overlaps something kept
    for p in props:
        assert p in kept or any(iou(p.bounds, k.bounds) >= thr for k in kept)


def test_hierarchy_normalization(tiny_bundle):
    _, state = reset(tiny_bundle)
    els = normalize_hierarchy(state)
    assert [e.text for e in els[:3]] == ["Free Coins", "Settings", "Boom"]
    assert [e.index for e in els] == list(range(len(els)))
    assert els[-1].action_key == "back" and els[-1].is_global
    assert els[0].action_key == "tap:1"


def test_selective_rule():
    bundle = load_bundle(BUNDLES / "color_paint.yaml")
    _, state = reset(bundle)
    els = normalize_hierarchy(state)
    picked = [e for e in els if should_invoke_vlm(e, "hierarchy")]
    assert picked
    for e in picked:
        assert not (e.text or "").strip()
        assert e.class_or_kind.endswith(("ImageView", "ImageButton", "WebView"))
    assert not any(should_invoke_vlm(e, "hierarchy") for e in els if e.is_global)


def contour_canvas():
    doc = {"app_id": "c", "manifest": {"package": "c", "activities": ["Main"]},
           "behavior": {"initial_state": "s", "states": {"s": {
               "activity": "Main", "rendering": "canvas",
               "regions": [{"bounds": [100, 100, 300, 200], "label": "Play", "tag": "UI_ELEMENT"},
                           {"bounds": [100, 400, 300, 500], "label": "Free gems", "tag": "AD"}],
               "contours": [[110, 110, 290, 190], [105, 395, 310, 505], [700, 700, 760, 750]]}}}}
    return reset(bundle_from_dict(doc))[1]


def test_grid_heuristic_snaps_and_merges():
    props = GridHeuristicAnalyzer(cell=60).propose(contour_canvas())
    assert [p.bounds for p in props] == [(60, 60, 300, 240), (60, 360, 360, 540), (660, 660, 780, 780)]


def test_canvas_perception_and_fallback():
    bundle = load_bundle(BUNDLES / "canvas_game.yaml")
    _, state = reset(bundle)
    els = Perceiver(ScriptedCaptioner()).perceive(state)
    regions = [e for e in els if e.source == "region"]
    assert regions and all(e.semantic_caption is not None for e in regions)
    assert all(e.action_key.startswith("tap_point:") for e in regions)

    class Broken:
        def propose(self, state):
            raise RuntimeError("model down")

    det = HybridDetector(deep=Broken())
    props = det.propose(contour_canvas())
    assert det.degraded
    assert props and all(p.origin == "heuristic_analyzer" for p in props)


def test_deep_detector_recall():
    bundle = load_bundle(BUNDLES / "canvas_game.yaml")
    _, state = reset(bundle)
    n = len(state.canvas_regions)
    assert len(SimulatedDeepDetector(recall=0.5).propose(state)) == round(0.5 * n)


@pytest.mark.parametrize("text, tag", [
    ("[AD] Install now banner", "AD"), ("[POTENTIAL AD] gift box", "POTENTIAL_AD"),
    ("[AD HINT] promo", "AD"), ("plain words", "UI_ELEMENT"), ("[WEIRD] thing", "UI_ELEMENT"),
])
def test_parse_caption(text, tag):
    assert parse_caption(text).tag == tag


def test_caption_tag_rejects_unknown():
    with pytest.raises(ValueError):
        CaptionTag("BANNER", "x")


class Flaky:
    def __init__(self, replies):
        self.replies = list(replies)

    def describe(self, instruction, requests):
        return self.replies.pop(0)


def _reqs(n):
    return [CaptionRequest(i, f"crop{i}", (0, 0, 10, 10)) for i in range(n)]


def test_caption_retries_then_succeeds():
    good = json.dumps([{"id": 0, "description": "[AD] x"}, {"id": 1, "description": "[UI_ELEMENT] y"}])
    tags = caption(_reqs(2), Flaky(["garbage", good]))
    assert [t.tag for t in tags] == ["AD", "UI_ELEMENT"]


def test_caption_gives_up_with_raw_text():
    tags = caption(_reqs(1), Flaky(["nope", "still nope"]))
    assert tags == [CaptionTag("UI_ELEMENT", "still nope")]


def test_caption_concurrently_keeps_order():
    class Echo:
        def describe(self, instruction, requests):
            return json.dumps([{"id": r.id, "description": f"[AD] {r.crop}"} for r in requests])

    tags = caption_concurrently(_reqs(6), Echo())
    assert [t.description for t in tags] == [f"crop{i}" for i in range(6)]


def test_selective_vs_everything_counts():
    bundle = load_bundle(BUNDLES / "color_paint.yaml")
    _, state = reset(bundle)
    sel, full = Perceiver(ScriptedCaptioner()), Perceiver(ScriptedCaptioner(), selective=False)
    sel.perceive(state)
    full.perceive(state)
    assert 0 < sel.stats.captioned < full.stats.captioned == full.stats.candidates
