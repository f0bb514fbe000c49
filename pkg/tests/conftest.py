from __future__ import annotations

from pathlib import Path

import pytest

from adscout.app_model import bundle_from_dict

ROOT = Path(__file__).resolve().parents[1]
CORPUS = ROOT / "corpus"
BUNDLES = CORPUS / "bundles"
EXPECTED = CORPUS / "expected"
GOLDENS = CORPUS / "goldens"
SEED_EXPERIENCES = CORPUS / "experiences" / "seed.jsonl"


def widget(cls, bounds, text=None, desc=None, rid=None, clickable=True, depth=1, **extra):
    w = {"class": cls, "bounds": list(bounds), "clickable": clickable, "depth": depth}
    if text is not None:
        w["text"] = text
    if desc is not None:
        w["desc"] = desc
    if rid is not None:
        w["id"] = rid
    w.update(extra)
    return w


def tiny_doc() -> dict:
    """Home -> Shop (on-entry popup ad after a tap on 'Free Coins'), Home -> Crash."""
    home = [
        widget("FrameLayout", (0, 0, 1080, 1920), clickable=False, depth=0),
        widget("Button", (0, 200, 1080, 320), text="Free Coins"),
        widget("Button", (0, 320, 1080, 440), text="Settings"),
        widget("Button", (0, 440, 1080, 560), text="Boom"),
    ]
    shop = [widget("FrameLayout", (0, 0, 1080, 1920), clickable=False, depth=0),
            widget("ImageButton", (0, 0, 100, 100), desc="Close")]
    settings = [widget("TextView", (0, 0, 1080, 200), text="Settings", clickable=False, depth=0)]
    return {
        "app_id": "com.example.tiny",
        "manifest": {"package": "com.example.tiny",
                     "activities": ["MainActivity", "ShopActivity", "SettingsActivity"]},
        "behavior": {
            "initial_state": "home",
            "states": {
                "home": {"activity": "MainActivity", "widgets": home,
                         "transitions": {"tap:1": "shop", "tap:2": "settings", "tap:3": {"to": "home", "crash": True}},
                         "emit": {"tap:1": [{"tag": "chromium", "offset": 1.0,
                                             "message": "GET https://googleads.g.doubleclick.net/mads/gma?x=1"}]}},
                "shop": {"activity": "ShopActivity", "widgets": shop,
                         "transitions": {"tap:1": "home", "back": "home"}},
                "settings": {"activity": "SettingsActivity", "widgets": settings,
                             "transitions": {"back": "home"}},
            },
            "ad_triggers": [{"ad_id": "shop_popup", "host_state": "shop", "ad_type": "popup"}],
        },
    }


@pytest.fixture
def tiny_bundle():
    return bundle_from_dict(tiny_doc())


@pytest.fixture(scope="session")
def corpus_campaign():
    """The full corpus campaign (5 policies x 20 apps x 5 seeds), shared across test modules."""
    from adscout.eval_harness.campaign import CampaignSpec, run_campaign

    return run_campaign(CampaignSpec.load(CORPUS / "campaign.yaml"))
