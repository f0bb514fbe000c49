"""Generate the fixture corpus: bundles, manifest, expected priors and seed experiences.

Run from the repository root:  python3 corpus/generate_corpus.py

dict_loop.yaml is hand-written and only referenced here.  Every other bundle is
built by the app builders below.  The expected prior documents are written from
the same table facts (SDK presets, declared slots, hand-listed trigger methods),
not by running the profiler.
"""

from __future__ import annotations

import json
from pathlib import Path

import yaml

ROOT = Path(__file__).resolve().parent
BUNDLES = ROOT / "bundles"
EXPECTED = ROOT / "expected"

SCREEN = (1080, 1920)
ROW_H = 120
TOP = 220

# --------------------------------------------------------------------------
# SDK presets: what each integration adds to the manifest and what the
# profiler is expected to match from it.

PRESETS = {
    "admob": {
        "library": "Google AdMob",
        "activities": ["com.google.android.gms.ads.AdActivity"],
        "permissions": ["com.google.android.gms.permission.AD_ID"],
        "metadata": [["com.google.android.gms.ads.APPLICATION_ID", "ca-app-pub-3940256099942544~3347511713"]],
        "unmatched_metadata": [],
    },
    # pre-2022 AdMob releases do not declare the advertising-id permission
    "admob_legacy": {
        "library": "Google AdMob",
        "activities": ["com.google.android.gms.ads.AdActivity"],
        "permissions": [],
        "metadata": [["com.google.android.gms.ads.APPLICATION_ID", "ca-app-pub-3940256099942544~3347511713"]],
        "unmatched_metadata": [],
    },
    "unity": {
        "library": "Unity Ads",
        "activities": ["com.unity3d.services.ads.adunit.AdUnitActivity"],
        "permissions": [],
        "metadata": [],
        "unmatched_metadata": [],
    },
    "facebook": {
        "library": "Meta Audience Network",
        "activities": ["com.facebook.ads.AudienceNetworkActivity"],
        "permissions": [],
        "metadata": [],
        "unmatched_metadata": [],
    },
    "applovin": {
        "library": "AppLovin",
        "activities": ["com.applovin.adview.AppLovinFullscreenActivity"],
        "permissions": [],
        "metadata": [],
        # the real key carries no package prefix, so it must not match
        "unmatched_metadata": [["applovin.sdk.key", "k3yExampleAppLovin"]],
    },
}

AD_HOSTS = {
    "admob": "https://googleads.g.doubleclick.net/mads/gma?format={fmt}&slotname=ca-app-pub-39402560999",
    "unity": "https://unityads.unity3d.com/v4/games/3451/requests?placement={fmt}",
    "facebook": "https://an.facebook.com/v2/placementbid?format={fmt}",
    "applovin": "https://ms.applovin.com/1.0/mediate?format={fmt}",
    "gam": "https://pubads.g.doubleclick.net/gampad/ads?iu=/offers&sz={fmt}",
}


def ad_request(sdk: str, fmt: str, offset: float) -> dict:
    return {"tag": "chromium", "message": "GET " + AD_HOSTS[sdk].format(fmt=fmt), "offset": offset}


def plain_request(url: str, offset: float = 0.5) -> dict:
    return {"tag": "chromium", "message": f"GET {url}", "offset": offset}


# --------------------------------------------------------------------------
# Widget and state helpers


def W(cls: str, text: str | None = None, *, desc: str | None = None, rid: str | None = None,
      click: bool = True, vlm: tuple[str, str] | None = None, key: str | None = None, bounds=None) -> dict:
    w = {"class": cls}
    if text is not None:
        w["text"] = text
    if desc is not None:
        w["desc"] = desc
    if rid is not None:
        w["id"] = rid
    if click:
        w["clickable"] = True
    if vlm is not None:
        w["vlm_label"] = {"tag": vlm[0], "description": vlm[1]}
    if bounds is not None:
        w["bounds"] = list(bounds)
    w["_key"] = key or text or desc or rid
    return w


def screen(activity: str, items: list[dict], *, go: dict | None = None, back: str | None = None,
           emit: dict | None = None, title: str | None = None, external: bool = False,
           root: str = "FrameLayout", package: str | None = None) -> dict:
    """A hierarchy state; ``go``/``emit`` are keyed by widget label and become ``tap:i`` keys."""
    widgets = [{"class": root, "bounds": [0, 0, *SCREEN], "depth": 0}]
    if title:
        widgets.append({"class": "TextView", "text": title, "bounds": [40, 100, 1040, 200], "depth": 1})
    index_of = {}
    row = 0
    for it in items:
        w = dict(it)
        key = w.pop("_key")
        if "bounds" not in w:
            w["bounds"] = [0, TOP + row * ROW_H, SCREEN[0], TOP + (row + 1) * ROW_H]
            row += 1
        if package and "id" in w and ":" not in w["id"]:
            w["id"] = f"{package}:id/{w['id']}"
        w["depth"] = 1
        index_of[key] = len(widgets)
        widgets.append(w)
    st: dict = {"activity": activity}
    if external:
        st["external"] = True
    st["widgets"] = widgets
    trans = {}
    for label, target in (go or {}).items():
        trans[f"tap:{index_of[label]}"] = target
    if back:
        trans["back"] = back
    if trans:
        st["transitions"] = trans
    if emit:
        st["emit"] = {(k if k == "back" else f"tap:{index_of[k]}"): v for k, v in emit.items()}
    st["_index"] = index_of
    return st


def canvas(activity: str, regions: list[tuple], *, go: dict | None = None, back: str | None = None,
           emit: dict | None = None, cols: int = 3) -> dict:
    """A canvas state; ``regions`` are (label, tag, description) laid out on a grid."""
    out = []
    index_of = {}
    cw, ch = SCREEN[0] // cols, 150
    for i, (label, tag, desc) in enumerate(regions):
        r, c = divmod(i, cols)
        x, y = c * cw + 20, 200 + r * (ch + 20)
        out.append({"bounds": [x, y, x + cw - 40, y + ch], "label": desc, "tag": tag})
        index_of[label] = i
    trans = {f"tap_region:{index_of[k]}": v for k, v in (go or {}).items()}
    if back:
        trans["back"] = back
    st = {"activity": activity, "rendering": "canvas", "regions": out}
    if trans:
        st["transitions"] = trans
    if emit:
        st["emit"] = {(k if k == "back" else f"tap_region:{index_of[k]}"): v for k, v in emit.items()}
    st["_index"] = index_of
    return st


def store_page(title: str) -> dict:
    return screen("com.android.vending.AssetBrowserActivity",
                  [W("TextView", title, click=False), W("Button", "Install")], external=True)


def browser_page(title: str) -> dict:
    return screen("org.chromium.chrome.browser.ChromeTabbedActivity",
                  [W("TextView", title, click=False), W("Button", "Open in app")], external=True)


def video_ad(activity: str, back_to: str) -> dict:
    return screen(activity, [W("VideoView", click=False), W("ImageButton", desc="Close ad", key="close")],
                  go={"close": back_to}, back=back_to)


def tap(state: dict, label) -> str:
    idx = state["_index"][label]
    return f"tap_region:{idx}" if state.get("rendering") == "canvas" else f"tap:{idx}"


def node(cls: str, rid: str | None = None, children: list | None = None, ad_type: str | None = None) -> dict:
    n: dict = {"class": cls}
    if rid:
        n["id"] = rid
    if children:
        n["children"] = children
    if ad_type:
        n["_ad_type"] = ad_type
    return n


def method(sig: str, apis=(), listeners=()) -> dict:
    m: dict = {"signature": sig}
    if apis:
        m["ad_apis"] = list(apis)
    if listeners:
        m["listeners"] = list(listeners)
    return m


def klass(name: str, superclass: str, methods: list[dict]) -> dict:
    return {"class": name, "superclass": superclass, "methods": methods}


APPCOMPAT = "androidx.appcompat.app.AppCompatActivity"
GMS = "com.google.android.gms.ads"


# --------------------------------------------------------------------------
# The apps.  Each builder returns the table facts for one bundle.


def app_minimal():
    pkg = "com.adscout.fixture.minimal"
    main = screen("MainActivity", [W("Button", "Start"), W("Button", "Watch Ad for Coins")],
                  title="Coin Collector",
                  go={"Start": "game", "Watch Ad for Coins": "reward_video"},
                  emit={"Watch Ad for Coins": [ad_request("admob", "rewarded", 1.5)]})
    game = screen("GameActivity", [W("Button", "Tap")], go={"Tap": "game"}, back="main")
    states = {"main": main, "game": game, "reward_video": video_ad(f"{GMS}.AdActivity", "main")}
    triggers = [{"ad_id": "coins_video", "host_state": "reward_video", "ad_type": "popup"}]
    code = [klass(f"{pkg}.MainActivity", APPCOMPAT, [
        method("onCreate", [f"{GMS}.MobileAds.initialize"]),
        method("onWatchAd", [f"{GMS}.rewarded.RewardedAd.load", f"{GMS}.rewarded.RewardedAd.show"]),
    ])]
    return dict(app_id=pkg, sdks=["admob"], activities=["MainActivity", "GameActivity"], states=states,
                initial="main", triggers=triggers, code=code, layouts={},
                expected_triggers={"MainActivity": [["onWatchAd", 3], ["onCreate", 1]]})


def app_no_ad():
    pkg = "com.adscout.fixture.notes"
    main = screen("MainActivity", [W("Button", "New Note"), W("TextView", "Groceries"), W("TextView", "Ideas"),
                                   W("Button", "Search"), W("Button", "Settings")], title="Notes",
                  go={"New Note": "editor", "Groceries": "note_a", "Ideas": "note_b", "Search": "main",
                      "Settings": "settings"})
    editor = screen("EditorActivity", [W("EditText", "Title"), W("EditText", "Body"), W("Button", "Save")],
                    go={"Title": "editor", "Body": "editor", "Save": "main"}, back="main")
    note_a = screen("NoteActivity", [W("TextView", "Milk, eggs", click=False), W("Button", "Edit"), W("Button", "Delete")],
                    go={"Edit": "editor", "Delete": "main"}, back="main")
    note_b = screen("NoteActivity", [W("TextView", "Learn piano", click=False), W("Button", "Edit"), W("Button", "Delete")],
                    go={"Edit": "editor", "Delete": "main"}, back="main")
    settings = screen("SettingsActivity", [W("Switch", "Dark mode"), W("TextView", "Font size"), W("TextView", "About")],
                      go={"Dark mode": "settings", "Font size": "settings", "About": "about"}, back="main")
    about = screen("SettingsActivity", [W("TextView", "Version 2.1", click=False)], back="settings")
    states = dict(main=main, editor=editor, note_a=note_a, note_b=note_b, settings=settings, about=about)
    code = [klass(f"{pkg}.MainActivity", APPCOMPAT, [method("onCreate")])]
    return dict(app_id=pkg, sdks=[], activities=["MainActivity", "EditorActivity", "NoteActivity", "SettingsActivity"],
                states=states, initial="main", triggers=[], code=code, layouts={}, expected_triggers={})


def app_calculator():
    pkg = "com.adscout.fixture.calc"
    keys = [str(d) for d in range(10)] + ["+", "-", "=", "C"]
    items = []
    for i, k in enumerate(keys):
        r, c = divmod(i, 4)
        items.append(W("Button", k, bounds=(c * 270, 500 + r * 250, c * 270 + 260, 740 + r * 250)))
    items.append(W("Button", "History", bounds=(0, 1800, 1080, 1900)))
    go = {k: "main" for k in keys}
    go["History"] = "history"
    main = screen("MainActivity", items, go=go)
    history = screen("HistoryActivity", [W("TextView", "12 + 30 = 42", click=False), W("Button", "Clear")],
                     go={"Clear": "history"}, back="main")
    code = [klass(f"{pkg}.MainActivity", APPCOMPAT, [method("onCreate")])]
    return dict(app_id=pkg, sdks=[], activities=["MainActivity", "HistoryActivity"], states={"main": main, "history": history},
                initial="main", triggers=[], code=code, layouts={}, expected_triggers={})


def app_superclass_chain():
    pkg = "com.quizzy.trivia"
    main = screen("MainActivity", [W("Button", "Play"), W("Button", "Leaderboard"), W("Button", "Settings")],
                  title="Trivia", go={"Play": "question", "Leaderboard": "board", "Settings": "settings"})
    question = screen("QuestionActivity", [W("TextView", "Capital of France?", click=False), W("Button", "Paris"),
                                           W("Button", "London"), W("Button", "Rome"), W("Button", "Madrid")],
                      go={"Paris": "result", "London": "result", "Rome": "result", "Madrid": "result"}, back="main")
    result = screen("ResultActivity", [W("TextView", "+10 points", click=False), W("Button", "Next Question"),
                                       W("Button", "Double Your Reward"), W("Button", "Home")],
                    go={"Next Question": "question", "Double Your Reward": "reward_video", "Home": "main"},
                    emit={"Double Your Reward": [ad_request("unity", "rewardedVideo", 2.2)]}, back="main")
    board = screen("LeaderboardActivity", [W("TextView", f"Player {i}") for i in range(1, 6)],
                   go={f"Player {i}": "board" for i in range(1, 6)}, back="main")
    settings = screen("SettingsActivity", [W("Switch", "Sound"), W("Switch", "Vibration")],
                      go={"Sound": "settings", "Vibration": "settings"}, back="main")
    states = dict(main=main, question=question, result=result, board=board, settings=settings,
                  reward_video=video_ad("com.unity3d.services.ads.adunit.AdUnitActivity", "result"))
    triggers = [{"ad_id": "double_reward", "host_state": "reward_video", "ad_type": "popup"}]
    code = [
        klass(f"{pkg}.MainActivity", APPCOMPAT, [method("onCreate", ["com.unity3d.ads.UnityAds.initialize"])]),
        klass(f"{pkg}.ResultActivity", APPCOMPAT, [method("onCreate")]),
        # two hops up the superclass chain before a registered activity is reached
        klass(f"{pkg}.reward.RewardScreenBase", f"{pkg}.ResultActivity", [method("prepare", ["com.unity3d.ads.UnityAds.load"])]),
        klass(f"{pkg}.reward.RewardScreen", f"{pkg}.reward.RewardScreenBase",
              [method("onDoubleReward", ["com.unity3d.ads.UnityAds.show"], ["com.unity3d.ads.IUnityAdsShowListener"])]),
    ]
    return dict(app_id=pkg, sdks=["unity"],
                activities=["MainActivity", "QuestionActivity", "ResultActivity", "LeaderboardActivity", "SettingsActivity"],
                states=states, initial="main", triggers=triggers, code=code, layouts={},
                expected_triggers={"MainActivity": [["onCreate", 1]],
                                   "ResultActivity": [["onDoubleReward", 3], ["prepare", 2]]})


def app_obfuscated():
    pkg = "com.q7x.torch"
    main = screen("a.a", [W("ToggleButton", "Light"), W("Button", "Offers"), W("Button", "Settings")],
                  go={"Light": "main", "Offers": "offers", "Settings": "settings"},
                  emit={"Offers": [ad_request("gam", "320x480", 1.0)]})
    settings = screen("a.c", [W("TextView", "Brightness"), W("TextView", "Strobe"), W("TextView", "Remove Ads")],
                      go={"Brightness": "settings", "Strobe": "settings", "Remove Ads": "purchase"}, back="main")
    purchase = screen("a.c", [W("TextView", "Remove all ads forever", click=False), W("Button", "Buy $1.99")], back="settings")
    offers = browser_page("Offer wall")
    states = dict(main=main, settings=settings, purchase=purchase, offers=offers)
    triggers = [{"ad_id": "offer_wall", "host_state": "offers", "context": [tap(main, "Offers")], "ad_type": "custom"}]
    code = [klass("a.a", "android.app.Activity", [method("a", ["b.c.d"]), method("b")]),
            klass("a.c", "android.app.Activity", [method("a")])]
    layouts = {"a.a": node("android.widget.FrameLayout", None, [node("a.b.e", "f")])}
    return dict(app_id=pkg, sdks=[], activities=["a.a", "a.c"], states=states, initial="main", triggers=triggers,
                code=code, layouts=layouts, resource_map={"f": "0x7f0b0001"}, expected_triggers={})


CANVAS_MENU = ["Play", "Levels", "Options", "Shop", "Leaderboard", "Achievements", "Daily Quest", "Profile",
               "Friends", "Mail", "Music", "Sound", "Help", "Credits", "Language", "Rate", "More Games",
               "Free Gems", "Exit"]


def app_canvas_game():
    pkg = "com.pixelforge.runner"
    regions = []
    for label in CANVAS_MENU:
        if label == "More Games":
            regions.append((label, "AD", "A 'More Games' banner promoting other titles from the developer."))
        elif label == "Free Gems":
            regions.append((label, "POTENTIAL_AD", "A 'Free Gems' offer that may ask to watch a video."))
        else:
            regions.append((label, "UI_ELEMENT", f"A '{label}' menu button."))
    main = canvas("MainActivity", regions, go={"Play": "level", "Levels": "levels", "Options": "options",
                                               "More Games": "more_games", "Free Gems": "gems_video"},
                  emit={"More Games": [ad_request("admob", "native", 2.0)],
                        "Free Gems": [ad_request("admob", "rewarded", 1.2)]})
    level = canvas("GameActivity", [("Pause", "UI_ELEMENT", "A pause button."), ("Jump", "UI_ELEMENT", "A jump button."),
                                    ("Slide", "UI_ELEMENT", "A slide button.")],
                   go={"Pause": "pause", "Jump": "level", "Slide": "level"}, back="main")
    pause = canvas("GameActivity", [("Resume", "UI_ELEMENT", "A resume button."), ("Quit", "UI_ELEMENT", "A quit button.")],
                   go={"Resume": "level", "Quit": "main"}, back="level")
    levels = canvas("MainActivity", [(f"World {i}", "UI_ELEMENT", f"A 'World {i}' tile.") for i in range(1, 7)],
                    go={f"World {i}": "level" for i in range(1, 7)}, back="main")
    options = canvas("MainActivity", [("Music", "UI_ELEMENT", "A music toggle."), ("Sound", "UI_ELEMENT", "A sound toggle."),
                                      ("Back", "UI_ELEMENT", "A back arrow.")], go={"Back": "main"}, back="main")
    states = dict(main=main, level=level, pause=pause, levels=levels, options=options,
                  more_games=store_page("PixelForge games"), gems_video=video_ad(f"{GMS}.AdActivity", "main"))
    triggers = [
        {"ad_id": "more_games", "host_state": "more_games", "context": [tap(main, "More Games")], "ad_type": "custom"},
        {"ad_id": "free_gems", "host_state": "gems_video", "ad_type": "popup"},
    ]
    code = [klass(f"{pkg}.MainActivity", "android.app.Activity",
                  [method("onCreate", [f"{GMS}.MobileAds.initialize"])]),
            klass(f"{pkg}.AdBridge", "java.lang.Object",
                  [method("showInterstitial", [f"{GMS}.interstitial.InterstitialAd.show"])])]
    return dict(app_id=pkg, sdks=["admob"], activities=["MainActivity", "GameActivity"], states=states, initial="main",
                triggers=triggers, code=code, layouts={}, rendering="canvas",
                expected_triggers={"MainActivity": [["onCreate", 1]], "unattributed": [["showInterstitial", 3]]})


def app_color_paint():
    pkg = "com.colorfun.paintbynumber"
    pics = [("cat", "A picture of a cat to color."), ("house", "A picture of a house to color."),
            ("flower", "A picture of a flower to color."), ("skull", "A skull-shaped picture to color.")]
    items = [W("TextView", "Library"), W("TextView", "My Works"), W("TextView", "Daily")]
    go = {"Library": "main", "My Works": "works", "Daily": "daily"}
    for i, (name, desc) in enumerate(pics):
        items.append(W("ImageView", key=name, vlm=("UI_ELEMENT", desc),
                       bounds=(40 + (i % 2) * 520, 700 + (i // 2) * 520, 520 + (i % 2) * 520, 1200 + (i // 2) * 520)))
        go[name] = "paint"
    items.append(W("ImageView", key="play_icon", vlm=("AD", "A video play icon offering a free color pack after an ad."),
                   bounds=(900, 100, 1040, 240)))
    go["play_icon"] = "reward_video"
    main = screen("MainActivity", items, go=go, emit={"play_icon": [ad_request("facebook", "rewarded_video", 1.8)]})
    paint = screen("PaintActivity", [W("Button", str(i)) for i in range(1, 7)] + [W("Button", "Done")],
                   go={**{str(i): "paint" for i in range(1, 7)}, "Done": "main"}, back="main")
    works = screen("MainActivity", [W("TextView", "No works yet", click=False), W("Button", "Start coloring")],
                   go={"Start coloring": "main"}, back="main")
    daily = screen("MainActivity", [W("TextView", "Today's picture", click=False), W("Button", "Open")],
                   go={"Open": "paint"}, back="main")
    states = dict(main=main, paint=paint, works=works, daily=daily,
                  reward_video=video_ad("com.facebook.ads.AudienceNetworkActivity", "main"))
    triggers = [{"ad_id": "color_pack_video", "host_state": "reward_video", "ad_type": "popup"}]
    code = [klass(f"{pkg}.MainActivity", APPCOMPAT, [
        method("onCreate", ["com.facebook.ads.AudienceNetworkAds.initialize"]),
        method("onPlayIconClick", ["com.facebook.ads.RewardedVideoAd.loadAd", "com.facebook.ads.RewardedVideoAd.show"],
               ["com.facebook.ads.RewardedVideoAdListener"]),
    ])]
    layouts = {"MainActivity": node("android.widget.FrameLayout", None, [
        node("androidx.recyclerview.widget.RecyclerView", "grid"),
        node("com.facebook.ads.NativeAdLayout", "native_ad_container", ad_type="native"),
    ])}
    return dict(app_id=pkg, sdks=["facebook"], activities=["MainActivity", "PaintActivity"], states=states,
                initial="main", triggers=triggers, code=code, layouts=layouts,
                resource_map={"grid": "0x7f0a0050", "native_ad_container": "0x7f0a0051"},
                expected_triggers={"MainActivity": [["onPlayIconClick", 3], ["onCreate", 1]]})


def app_success_activity():
    pkg = "com.brainy.blocks"
    main = screen("MainActivity", [W("Button", "Play"), W("Button", "Settings")], title="Brainy Blocks",
                  go={"Play": "level", "Settings": "settings"})
    level = screen("GameActivity", [W("Button", "Rotate"), W("Button", "Drop"), W("Button", "Solve")],
                   go={"Rotate": "level", "Drop": "level", "Solve": "complete"}, back="main")
    complete = screen("LevelCompleteActivity", [W("TextView", "Level complete!", click=False), W("Button", "Next Level"),
                                                W("Button", "Menu")],
                      go={"Next Level": "interstitial", "Menu": "main"},
                      emit={"Next Level": [ad_request("admob", "interstitial", 0.8)]}, back="main")
    settings = screen("SettingsActivity", [W("Switch", "Sound"), W("Switch", "Hints")],
                      go={"Sound": "settings", "Hints": "settings"}, back="main")
    interstitial = screen(f"{GMS}.AdActivity", [W("ImageView", click=False), W("ImageButton", desc="Close ad", key="close")],
                          go={"close": "level"}, back="level")
    states = dict(main=main, level=level, complete=complete, settings=settings, interstitial=interstitial)
    code = [klass(f"{pkg}.LevelCompleteActivity", APPCOMPAT, [
        method("onNextLevel", [f"{GMS}.interstitial.InterstitialAd.show"], [f"{GMS}.FullScreenContentCallback"]),
    ])]
    return dict(app_id=pkg, sdks=["admob"], activities=["MainActivity", "GameActivity", "LevelCompleteActivity",
                                                        "SettingsActivity"],
                states=states, initial="main", triggers=[], code=code, layouts={},
                success_activities=[f"{GMS}.AdActivity"],
                expected_triggers={"LevelCompleteActivity": [["onNextLevel", 3]]})


def app_news_reader():
    pkg = "com.dailybrief.news"
    heads = [f"Headline {i}" for i in range(1, 7)]
    items = [W("ImageButton", desc="Open menu", key="menu")] + [W("TextView", h) for h in heads[:3]]
    items.append(W("LinearLayout", "Save 50% on SecureVPN today", rid="sponsored_item", key="sponsored"))
    items += [W("TextView", h) for h in heads[3:]]
    go = {"menu": "drawer", "sponsored": "sponsored", **{h: f"article_{i}" for i, h in enumerate(heads)}}
    main = screen("MainActivity", items, go=go, package=pkg,
                  emit={"sponsored": [ad_request("admob", "native", 0.6)]})
    states = {"main": main}
    for i in range(len(heads)):
        states[f"article_{i}"] = screen("ArticleActivity", [W("TextView", "Story text", click=False), W("Button", "Related story"),
                                                            W("Button", "Font size")],
                                        go={"Related story": f"article_{(i + 1) % len(heads)}", "Font size": f"article_{i}"},
                                        back="main")
    states["drawer"] = screen("MainActivity", [W("TextView", "Topics"), W("TextView", "Remove Ads"), W("TextView", "Settings")],
                              go={"Topics": "topics", "Remove Ads": "purchase", "Settings": "settings"}, back="main")
    states["topics"] = screen("TopicsActivity", [W("CheckBox", t) for t in ("World", "Tech", "Sports")],
                              go={t: "topics" for t in ("World", "Tech", "Sports")}, back="drawer")
    states["purchase"] = screen("PurchaseActivity", [W("TextView", "Ad-free reading", click=False), W("Button", "Subscribe")],
                                back="drawer")
    states["settings"] = screen("SettingsActivity", [W("Switch", "Notifications")], go={"Notifications": "settings"},
                                back="drawer")
    states["sponsored"] = screen("SponsoredActivity", [W("TextView", "Sponsored", click=False), W("Button", "Learn More")],
                                 back="main")
    triggers = [{"ad_id": "sponsored_story", "host_state": "sponsored", "ad_type": "embedded"}]
    code = [klass(f"{pkg}.MainActivity", APPCOMPAT, [
        method("onCreate", [f"{GMS}.MobileAds.initialize"]),
        method("bindSponsored", [f"{GMS}.AdLoader.loadAd"], [f"{GMS}.nativead.NativeAd.OnNativeAdLoadedListener"]),
    ])]
    layouts = {"MainActivity": node("android.widget.LinearLayout", None, [
        node("androidx.recyclerview.widget.RecyclerView", "feed"),
        node(f"{GMS}.nativead.NativeAdView", "sponsored_item", ad_type="native"),
    ])}
    return dict(app_id=pkg, sdks=["admob"], activities=["MainActivity", "ArticleActivity", "TopicsActivity",
                                                        "PurchaseActivity", "SettingsActivity", "SponsoredActivity"],
                states=states, initial="main", triggers=triggers, code=code, layouts=layouts,
                resource_map={"feed": "0x7f0a0031", "sponsored_item": "0x7f0a0032"},
                expected_triggers={"MainActivity": [["bindSponsored", 2], ["onCreate", 1]]})


def app_weather():
    pkg = "com.skycast.weather"
    days = ["Monday", "Tuesday", "Wednesday", "Thursday", "Friday", "Saturday", "Sunday"]
    items = [W("TextView", "Lisbon 21C", click=False)] + [W("TextView", d) for d in days] + [W("Button", "Radar")]
    items.append(W(f"{GMS}.AdView", rid="adView", key="banner", bounds=(0, 1750, 1080, 1900)))
    go = {**{d: f"day_{i}" for i, d in enumerate(days)}, "Radar": "radar", "banner": "banner_landing"}
    main = screen("MainActivity", items, go=go, package=pkg, emit={"banner": [ad_request("admob", "banner", 0.4)]})
    states = {"main": main}
    for i in range(len(days)):
        states[f"day_{i}"] = screen("DayActivity", [W("TextView", "Hourly", click=False), W("Button", "Next day"),
                                                    W("Button", "Previous day")],
                                    go={"Next day": f"day_{(i + 1) % 7}", "Previous day": f"day_{(i - 1) % 7}"}, back="main")
    states["radar"] = screen("RadarActivity", [W("Button", "Zoom in"), W("Button", "Zoom out")],
                             go={"Zoom in": "radar", "Zoom out": "radar"}, back="main")
    states["banner_landing"] = browser_page("Umbrella sale")
    triggers = [{"ad_id": "banner_click", "host_state": "banner_landing", "context": [tap(main, "banner")],
                 "ad_type": "embedded"}]
    code = [klass(f"{pkg}.MainActivity", APPCOMPAT, [method("onCreate", [f"{GMS}.MobileAds.initialize", f"{GMS}.AdView.loadAd"],
                                                            [f"{GMS}.AdListener"])])]
    layouts = {"MainActivity": node("android.widget.LinearLayout", None, [
        node("android.widget.TextView", "city"), node("android.widget.ListView", "days"),
        node(f"{GMS}.AdView", "adView", ad_type="banner")])}
    return dict(app_id=pkg, sdks=["admob"], activities=["MainActivity", "DayActivity", "RadarActivity"], states=states,
                initial="main", triggers=triggers, code=code, layouts=layouts,
                resource_map={"city": "0x7f0a0010", "days": "0x7f0a0011", "adView": "0x7f0a0012"},
                expected_triggers={"MainActivity": [["onCreate", 2]]})


def app_sound_meter():
    pkg = "com.decibel.meter"
    main = screen("MainActivity", [W("Button", "Start"), W("Button", "Calibrate"), W("Button", "Settings")], title="Sound Meter",
                  go={"Start": "main", "Calibrate": "calibrate", "Settings": "settings"})
    calibrate = screen("CalibrateActivity", [W("Button", "+1 dB"), W("Button", "-1 dB"), W("Button", "Reset")],
                       go={"+1 dB": "calibrate", "-1 dB": "calibrate", "Reset": "calibrate"}, back="main")
    settings = screen("SettingsActivity", [W("TextView", "Units"), W("TextView", "Theme"), W("TextView", "Remove Ads"),
                                           W("TextView", "More Apps")],
                      go={"Units": "settings", "Theme": "settings", "Remove Ads": "purchase", "More Apps": "store"},
                      emit={"More Apps": [ad_request("applovin", "cross_promo", 2.5)]}, back="main")
    purchase = screen("PurchaseActivity", [W("TextView", "Go ad-free", click=False), W("Button", "Buy")], back="settings")
    states = dict(main=main, calibrate=calibrate, settings=settings, purchase=purchase, store=store_page("Decibel apps"))
    triggers = [{"ad_id": "more_apps", "host_state": "store", "context": [tap(settings, "More Apps")], "ad_type": "custom"}]
    code = [klass(f"{pkg}.MainActivity", APPCOMPAT, [method("onCreate", ["com.applovin.mediation.ads.MaxInterstitialAd.loadAd"])]),
            klass(f"{pkg}.SettingsActivity", APPCOMPAT, [method("onMoreApps", ["com.applovin.sdk.AppLovinSdk.initializeSdk"])])]
    return dict(app_id=pkg, sdks=["applovin"], activities=["MainActivity", "CalibrateActivity", "SettingsActivity",
                                                           "PurchaseActivity"],
                states=states, initial="main", triggers=triggers, code=code, layouts={},
                expected_triggers={"MainActivity": [["onCreate", 2]], "SettingsActivity": [["onMoreApps", 1]]})


def app_recipe():
    pkg = "com.tastyhome.recipes"
    dishes = ["Pasta", "Soup", "Salad", "Cake", "Curry", "Tacos", "Sushi", "Pizza", "Ramen", "Stew", "Pie", "Bread"]
    tabs = ["Home", "Search", "Favorites", "Offers"]
    items = [W("TextView", d) for d in dishes]
    items += [W("Button", t, bounds=(i * 270, 1780, i * 270 + 260, 1900)) for i, t in enumerate(tabs)]
    go = {**{d: f"recipe_{i}" for i, d in enumerate(dishes)}, "Home": "main", "Search": "search",
          "Favorites": "favorites", "Offers": "deals"}
    main = screen("MainActivity", items, go=go)
    states = {"main": main}
    for i, d in enumerate(dishes):
        states[f"recipe_{i}"] = screen("RecipeActivity", [W("TextView", f"{d} ingredients", click=False), W("Button", "Steps"),
                                                          W("Button", "Add to favorites")],
                                       go={"Steps": f"steps_{i}", "Add to favorites": f"recipe_{i}"}, back="main")
        states[f"steps_{i}"] = screen("RecipeActivity", [W("TextView", "Step 1", click=False), W("Button", "Next step")],
                                      go={"Next step": f"steps_{i}"}, back=f"recipe_{i}")
    states["search"] = screen("SearchActivity", [W("EditText", "Search recipes")], go={"Search recipes": "search"}, back="main")
    states["favorites"] = screen("FavoritesActivity", [W("TextView", "Nothing saved yet", click=False)], back="main")
    deals = screen("DealsActivity", [W("TextView", "Weekly Menu"), W("TextView", "Free Delivery Coupon")],
                   go={"Weekly Menu": "deals", "Free Delivery Coupon": "coupon"},
                   emit={"Free Delivery Coupon": [ad_request("admob", "native", 1.1)]}, back="main")
    states["deals"] = deals
    states["coupon"] = browser_page("FoodNow coupon")
    triggers = [{"ad_id": "delivery_coupon", "host_state": "coupon", "context": [tap(deals, "Free Delivery Coupon")],
                 "ad_type": "custom"}]
    code = [klass(f"{pkg}.DealsActivity", APPCOMPAT, [method("onCreate", [f"{GMS}.AdView.loadAd"])])]
    layouts = {"DealsActivity": node("android.widget.FrameLayout", None, [
        node("android.widget.ListView", "deal_list"), node(f"{GMS}.AdView", "deals_banner", ad_type="banner")])}
    return dict(app_id=pkg, sdks=["admob"], activities=["MainActivity", "RecipeActivity", "SearchActivity",
                                                        "FavoritesActivity", "DealsActivity"],
                states=states, initial="main", triggers=triggers, code=code, layouts=layouts,
                resource_map={"deal_list": "0x7f0a0070", "deals_banner": "0x7f0a0071"},
                expected_triggers={"DealsActivity": [["onCreate", 2]]})


def app_wallpaper():
    pkg = "com.hdwalls.wallpapers"
    themes = ["mountains", "ocean", "forest", "city", "desert", "galaxy"]
    items = [W("TextView", t) for t in ("Popular", "New", "Categories")]
    go = {"Popular": "main", "New": "main", "Categories": "categories"}
    for i, t in enumerate(themes):
        items.append(W("ImageView", key=t, vlm=("UI_ELEMENT", f"A wallpaper thumbnail of {t}."),
                       bounds=(20 + (i % 3) * 350, 700 + (i // 3) * 500, 350 + (i % 3) * 350, 1150 + (i // 3) * 500)))
        go[t] = "preview"
    main = screen("MainActivity", items, go=go)
    preview = screen("PreviewActivity", [W("Button", "Download"), W("Button", "Set as Wallpaper"), W("Button", "Share")],
                     go={"Download": "interstitial", "Set as Wallpaper": "preview", "Share": "preview"},
                     emit={"Download": [ad_request("unity", "video", 1.4)]}, back="main")
    categories = screen("MainActivity", [W("TextView", c) for c in ("Nature", "Abstract", "Cars")],
                        go={c: "main" for c in ("Nature", "Abstract", "Cars")}, back="main")
    states = dict(main=main, preview=preview, categories=categories,
                  interstitial=video_ad("com.unity3d.services.ads.adunit.AdUnitActivity", "preview"))
    triggers = [{"ad_id": "download_interstitial", "host_state": "interstitial", "ad_type": "popup"}]
    code = [klass(f"{pkg}.PreviewActivity", APPCOMPAT, [method("onDownload", ["com.unity3d.ads.UnityAds.show"])])]
    return dict(app_id=pkg, sdks=["unity"], activities=["MainActivity", "PreviewActivity"], states=states,
                initial="main", triggers=triggers, code=code, layouts={},
                expected_triggers={"PreviewActivity": [["onDownload", 3]]})


def app_music_player():
    pkg = "com.beatbox.player"
    songs = [f"Song {i}" for i in range(1, 11)]
    items = [W("TextView", s) for s in songs] + [W("Button", "Library"), W("Button", "Themes")]
    main = screen("MainActivity", items, go={**{s: f"player_{i}" for i, s in enumerate(songs)}, "Library": "main",
                                             "Themes": "themes"})
    states = {"main": main}
    ctrl = ["Previous", "Play", "Next", "Shuffle", "Repeat"]
    for i in range(len(songs)):
        n = len(songs)
        states[f"player_{i}"] = screen("PlayerActivity", [W("ImageButton", desc=c) for c in ctrl],
                                       go={"Previous": f"player_{(i - 1) % n}", "Play": f"player_{i}",
                                           "Next": f"player_{(i + 1) % n}", "Shuffle": f"player_{i}",
                                           "Repeat": f"player_{i}"}, back="main")
    themes = screen("ThemesActivity", [W("TextView", "Classic"), W("TextView", "Dark"),
                                       W("TextView", "Neon - watch a video to unlock", key="neon")],
                    go={"Classic": "themes", "Dark": "themes", "neon": "reward_video"},
                    emit={"neon": [ad_request("admob", "rewarded", 1.6)]}, back="main")
    states["themes"] = themes
    states["reward_video"] = video_ad(f"{GMS}.AdActivity", "themes")
    triggers = [{"ad_id": "theme_unlock", "host_state": "reward_video", "ad_type": "popup"}]
    code = [klass(f"{pkg}.ThemesActivity", APPCOMPAT, [method("unlockTheme", [f"{GMS}.rewarded.RewardedAd.show"],
                                                              ["com.google.android.gms.ads.OnUserEarnedRewardListener"])]),
            klass(f"{pkg}.PlayerActivity", APPCOMPAT, [method("onCreate", [f"{GMS}.AdView.loadAd"])])]
    layouts = {"PlayerActivity": node("android.widget.LinearLayout", None, [
        node("android.widget.ImageView", "art"), node(f"{GMS}.AdView", "player_banner", ad_type="banner")])}
    return dict(app_id=pkg, sdks=["admob"], activities=["MainActivity", "PlayerActivity", "ThemesActivity"],
                states=states, initial="main", triggers=triggers, code=code, layouts=layouts,
                resource_map={"art": "0x7f0a0090", "player_banner": "0x7f0a0091"},
                expected_triggers={"ThemesActivity": [["unlockTheme", 3]], "PlayerActivity": [["onCreate", 2]]})


def app_ebook_reader():
    pkg = "com.pagepal.reader"
    books = [f"Book {i}" for i in range(1, 5)]
    main = screen("MainActivity", [W("TextView", b) for b in books] + [W("Button", "Store")],
                  go={**{b: "reader_0" for b in books}, "Store": "store"})
    states = {"main": main}
    pages = 6
    for i in range(pages):
        states[f"reader_{i}"] = screen("ReaderActivity", [W("Button", "Previous Page"), W("Button", "Next Page"),
                                                          W("Button", "Bookmark")],
                                       go={"Previous Page": f"reader_{max(i - 1, 0)}",
                                           "Next Page": f"reader_{min(i + 1, pages - 1)}", "Bookmark": f"reader_{i}"},
                                       back="main")
    store = screen("StoreActivity", [W("TextView", "Top Sellers"), W("TextView", "New Releases"),
                                     W("TextView", "Free Books - Sponsored", key="free_books")],
                   go={"Top Sellers": "store", "New Releases": "store", "free_books": "sponsored_offer"},
                   emit={"free_books": [ad_request("facebook", "native", 0.9)]}, back="main")
    states["store"] = store
    states["sponsored_offer"] = screen("StoreActivity", [W("TextView", "Sponsored", click=False), W("Button", "Get offer")],
                                       back="store")
    triggers = [{"ad_id": "sponsored_books", "host_state": "sponsored_offer", "ad_type": "embedded"}]
    code = [klass(f"{pkg}.StoreActivity", APPCOMPAT, [method("onCreate", ["com.facebook.ads.NativeAd.loadAd"],
                                                             ["com.facebook.ads.NativeAdListener"])])]
    layouts = {"StoreActivity": node("android.widget.LinearLayout", None, [
        node("android.widget.ListView", "catalog"), node("com.facebook.ads.NativeAdLayout", "store_native", ad_type="native")])}
    return dict(app_id=pkg, sdks=["facebook"], activities=["MainActivity", "ReaderActivity", "StoreActivity"],
                states=states, initial="main", triggers=triggers, code=code, layouts=layouts,
                resource_map={"catalog": "0x7f0a00a0", "store_native": "0x7f0a00a1"},
                expected_triggers={"StoreActivity": [["onCreate", 2]]})


def app_fitness():
    pkg = "com.fitpulse.workout"
    workouts = ["Push-ups", "Squats", "Plank", "Lunges"]
    items = [W("TextView", w) for w in workouts]
    items.append(W("LinearLayout", "30-day Yoga plan", rid="promo_plan", key="promo"))
    items += [W("Button", "Rewards"), W("Button", "Profile")]
    main = screen("MainActivity", items, package=pkg,
                  go={**{w: "workout" for w in workouts}, "promo": "promo", "Rewards": "rewards", "Profile": "profile"},
                  emit={"promo": [ad_request("admob", "native", 0.7)]})
    workout = screen("WorkoutActivity", [W("Button", "Start timer"), W("Button", "Skip")],
                     go={"Start timer": "workout", "Skip": "workout"}, back="main")
    rewards = screen("RewardsActivity", [W("TextView", "Invite Friends"), W("TextView", "Claim Daily Bonus")],
                     go={"Invite Friends": "rewards", "Claim Daily Bonus": "bonus_video"},
                     emit={"Claim Daily Bonus": [ad_request("admob", "rewarded", 2.0)]}, back="main")
    profile = screen("ProfileActivity", [W("EditText", "Weight"), W("EditText", "Height")],
                     go={"Weight": "profile", "Height": "profile"}, back="main")
    promo = screen("PromoActivity", [W("TextView", "Sponsored", click=False), W("Button", "Try free")], back="main")
    states = dict(main=main, workout=workout, rewards=rewards, profile=profile, promo=promo,
                  bonus_video=video_ad(f"{GMS}.AdActivity", "rewards"))
    triggers = [{"ad_id": "daily_bonus", "host_state": "bonus_video", "ad_type": "popup"},
                {"ad_id": "sponsored_plan", "host_state": "promo", "ad_type": "embedded"}]
    code = [klass(f"{pkg}.RewardsActivity", APPCOMPAT, [method("onClaim", [f"{GMS}.rewarded.RewardedAd.show"])]),
            klass(f"{pkg}.MainActivity", APPCOMPAT, [method("onCreate", [f"{GMS}.MobileAds.initialize"])])]
    layouts = {"MainActivity": node("android.widget.LinearLayout", None, [
        node("android.widget.ListView", "workouts"), node(f"{GMS}.nativead.NativeAdView", "promo_plan", ad_type="native")])}
    return dict(app_id=pkg, sdks=["admob"], activities=["MainActivity", "WorkoutActivity", "RewardsActivity",
                                                        "ProfileActivity", "PromoActivity"],
                states=states, initial="main", triggers=triggers, code=code, layouts=layouts,
                resource_map={"workouts": "0x7f0a00b0", "promo_plan": "0x7f0a00b1"},
                expected_triggers={"RewardsActivity": [["onClaim", 3]], "MainActivity": [["onCreate", 1]]})


def app_qr_scanner():
    pkg = "com.scanly.qr"
    main = screen("MainActivity", [W("Button", "Scan QR Code"), W("Button", "History"), W("Button", "Go Premium - No Ads",
                                                                                         key="premium")],
                  go={"Scan QR Code": "scanning", "History": "history", "premium": "purchase"})
    scanning = screen("ScanActivity", [W("SurfaceView", click=False), W("Button", "Capture"), W("Button", "Flash")],
                      go={"Capture": "result", "Flash": "scanning"},
                      emit={"Capture": [ad_request("admob", "interstitial", 1.3)]}, back="main")
    result = screen("ResultActivity", [W("TextView", "https://example.org", click=False), W("Button", "Open Link"),
                                       W("Button", "Copy")],
                    go={"Open Link": "link", "Copy": "result"}, back="main")
    history = screen("HistoryActivity", [W("TextView", "No scans yet", click=False), W("Button", "Clear")],
                     go={"Clear": "history"}, back="main")
    purchase = screen("PurchaseActivity", [W("TextView", "Remove ads", click=False), W("Button", "Buy")], back="main")
    states = dict(main=main, scanning=scanning, result=result, history=history, purchase=purchase,
                  link=browser_page("example.org"))
    triggers = [{"ad_id": "scan_interstitial", "host_state": "result", "context": [tap(scanning, "Capture")],
                 "ad_type": "popup"}]
    code = [klass(f"{pkg}.ScanActivity", APPCOMPAT, [method("onCapture", [f"{GMS}.interstitial.InterstitialAd.load"],
                                                            [f"{GMS}.interstitial.InterstitialAdLoadCallback"])])]
    return dict(app_id=pkg, sdks=["admob"], activities=["MainActivity", "ScanActivity", "ResultActivity",
                                                        "HistoryActivity", "PurchaseActivity"],
                states=states, initial="main", triggers=triggers, code=code, layouts={},
                expected_triggers={"ScanActivity": [["onCapture", 2]]})


def app_puzzle_canvas():
    pkg = "com.tilemind.puzzle"
    regions = [(f"Level {i}", "UI_ELEMENT", f"A 'Level {i}' tile.") for i in range(1, 13)]
    regions += [("Hint", "POTENTIAL_AD", "A lightbulb hint button that may offer a video for a hint."),
                ("Settings", "UI_ELEMENT", "A gear icon for settings.")]
    main = canvas("MainActivity", regions, cols=4,
                  go={**{f"Level {i}": "board" for i in range(1, 13)}, "Hint": "hint_video", "Settings": "settings"},
                  emit={"Hint": [ad_request("unity", "rewardedVideo", 1.7)]})
    board = canvas("BoardActivity", [(f"Tile {i}", "UI_ELEMENT", f"A puzzle tile numbered {i}.") for i in range(1, 10)],
                   go={f"Tile {i}": "board" for i in range(1, 10)}, back="main")
    settings = canvas("MainActivity", [("Sound", "UI_ELEMENT", "A sound toggle."), ("Back", "UI_ELEMENT", "A back arrow.")],
                      go={"Back": "main"}, back="main")
    states = dict(main=main, board=board, settings=settings,
                  hint_video=video_ad("com.unity3d.services.ads.adunit.AdUnitActivity", "main"))
    triggers = [{"ad_id": "hint_video", "host_state": "hint_video", "ad_type": "popup"}]
    code = [klass(f"{pkg}.MainActivity", "android.app.Activity", [method("onHint", ["com.unity3d.ads.UnityAds.show"])])]
    return dict(app_id=pkg, sdks=["unity"], activities=["MainActivity", "BoardActivity"], states=states, initial="main",
                triggers=triggers, code=code, layouts={}, rendering="canvas",
                expected_triggers={"MainActivity": [["onHint", 3]]})


def app_translator():
    pkg = "com.linguo.translate"
    main = screen("MainActivity", [W("EditText", "Enter text"), W("Button", "Translate"), W("Button", "Languages"),
                                   W("Button", "Offline Packs")],
                  go={"Enter text": "main", "Translate": "result", "Languages": "languages", "Offline Packs": "packs"})
    result = screen("MainActivity", [W("TextView", "Hola", click=False), W("Button", "Copy"), W("Button", "Speak")],
                    go={"Copy": "result", "Speak": "result"}, back="main")
    languages = screen("LanguagesActivity", [W("CheckBox", l) for l in ("Spanish", "French", "German", "Italian")],
                       go={l: "languages" for l in ("Spanish", "French", "German", "Italian")}, back="main")
    packs = screen("PacksActivity", [W("TextView", "Spanish pack"), W("TextView", "French pack"),
                                     W("TextView", "Free pack from our partner - install", key="partner")],
                   go={"Spanish pack": "packs", "French pack": "packs", "partner": "store"},
                   emit={"partner": [ad_request("admob", "app_install", 2.1)]}, back="main")
    states = dict(main=main, result=result, languages=languages, packs=packs, store=store_page("Partner app"))
    triggers = [{"ad_id": "partner_install", "host_state": "store", "context": [tap(packs, "partner")], "ad_type": "custom"}]
    code = [klass(f"{pkg}.PacksActivity", APPCOMPAT, [method("onPartnerClick", [f"{GMS}.AdLoader.loadAd"])])]
    return dict(app_id=pkg, sdks=["admob"], activities=["MainActivity", "LanguagesActivity", "PacksActivity"],
                states=states, initial="main", triggers=triggers, code=code, layouts={},
                expected_triggers={"PacksActivity": [["onPartnerClick", 2]]})


BUILDERS = {
    "minimal": app_minimal, "no_ad": app_no_ad, "calculator": app_calculator,
    "superclass_chain": app_superclass_chain, "obfuscated": app_obfuscated, "canvas_game": app_canvas_game,
    "color_paint": app_color_paint, "success_activity": app_success_activity, "news_reader": app_news_reader,
    "weather": app_weather, "sound_meter": app_sound_meter, "recipe": app_recipe, "wallpaper": app_wallpaper,
    "music_player": app_music_player, "ebook_reader": app_ebook_reader, "fitness": app_fitness,
    "qr_scanner": app_qr_scanner, "puzzle_canvas": app_puzzle_canvas, "translator": app_translator,
}

# dict_loop is hand-authored; its facts are listed here for the manifest and expectations.
DICT_LOOP = dict(
    app_id="com.picolina.aymane.serhani", sdks=["admob_legacy"], success_activities=[], rendering="hierarchy",
    ads={"play_redirect": "custom"},
    slots=[{"activity": "MainActivity", "view_class": f"{GMS}.AdView", "resource_id_string": "adView",
            "resource_id_hex": "0x7f0a0021", "inferred_ad_type": "banner", "depth": 2}],
    expected_triggers={"MainActivity": [["onCreate", 2]]},
    behavioral=True,
)


# --------------------------------------------------------------------------
# Assembly


def _strip(obj):
    if isinstance(obj, dict):
        return {k: _strip(v) for k, v in obj.items() if not k.startswith("_")}
    if isinstance(obj, list):
        return [_strip(v) for v in obj]
    return obj


def _slot_entries(layouts: dict, resource_map: dict) -> list[dict]:
    out = []
    for activity in sorted(layouts):
        def walk(n, depth):
            if "_ad_type" in n:
                rid = n.get("id")
                out.append({"activity": activity, "view_class": n["class"], "resource_id_string": rid,
                            "resource_id_hex": resource_map.get(rid), "inferred_ad_type": n["_ad_type"], "depth": depth})
            for c in n.get("children", ()):
                walk(c, depth + 1)
        walk(layouts[activity], 0)
    return out


def expected_priors(facts: dict, slots: list[dict]) -> dict:
    presets = [PRESETS[s] for s in facts["sdks"]]
    libs = {p["library"] for p in presets}
    triggers = facts["expected_triggers"]
    slot_libs = sorted({PRESETS[s]["library"] for s in facts["sdks"]}) if slots else []
    return {
        "screen": {
            "ad_related_activities": sorted(a for p in presets for a in p["activities"]),
            "matched_permissions": [x for p in presets for x in p["permissions"]],
            "matched_metadata": [x for p in presets for x in p["metadata"]],
            "detected_libraries": sorted(libs),
            "success_activities": list(facts.get("success_activities", [])),
        },
        "slot": {"entries": slots, "warnings": [], "libraries": slot_libs},
        "trigger": {
            "methods_by_activity": {k: triggers[k] for k in sorted(triggers)},
            "libraries": sorted(libs) if triggers else [],
        },
    }


def bundle_doc(facts: dict) -> dict:
    presets = [PRESETS[s] for s in facts["sdks"]]
    manifest = {
        "package": facts["app_id"],
        "activities": facts["activities"] + [a for p in presets for a in p["activities"]],
        "permissions": ["android.permission.INTERNET"] + [x for p in presets for x in p["permissions"]],
        "metadata": [x for p in presets for x in p["metadata"] + p["unmatched_metadata"]],
        "success_activities": facts.get("success_activities", []),
    }
    doc = {"app_id": facts["app_id"], "manifest": manifest}
    if facts.get("resource_map"):
        doc["resource_map"] = facts["resource_map"]
    if facts["layouts"]:
        doc["layouts"] = facts["layouts"]
    doc["code_summary"] = facts["code"]
    doc["behavior"] = {"initial_state": facts["initial"], "states": facts["states"], "ad_triggers": facts["triggers"]}
    return _strip(doc)


def ground_truth(facts: dict) -> dict[str, str]:
    ads = {t["ad_id"]: t["ad_type"] for t in facts["triggers"]}
    for act in facts.get("success_activities", []):
        ads[f"activity:{act}"] = "popup"
    return ads


def has_behavioral(facts: dict) -> bool:
    return any("emit" in s for s in facts["states"].values())


def seed_experiences(path: Path) -> None:
    from adscout.memory import ExperienceStore

    if path.exists():
        path.unlink()
    store = ExperienceStore(path=path)
    planted = [
        ("DrawerLayout NavigationView LinearLayoutCompat CheckedTextView Other App More Apps",
         "Exploring hidden menus and 'More Apps' or 'Other App' entries often reveals developer cross-promotion ads.",
         "com.example.seed.menu"),
        ("Button Watch Video Free Coins Reward",
         "Buttons offering free rewards, bonuses or unlocks usually play a rewarded video ad when tapped.",
         "com.example.seed.reward"),
        ("ListView Sponsored item native card",
         "Items labeled 'Sponsored' inside content feeds are native ads that open a promotional page.",
         "com.example.seed.feed"),
    ]
    for i, (text, summary, app) in enumerate(planted):
        store.store(store.make_experience(text, summary, app, [], created_at=1_700_000_000.0 + i))


def main() -> None:
    BUNDLES.mkdir(exist_ok=True)
    EXPECTED.mkdir(exist_ok=True)
    apps = []
    dl = DICT_LOOP
    apps.append({"app_id": dl["app_id"], "bundle": "bundles/dict_loop.yaml", "rendering": dl["rendering"],
                 "ads": dl["ads"], "evidence": {"manifest": True, "layout": True, "behavioral": True}})
    (EXPECTED / "dict_loop.json").write_text(json.dumps(expected_priors(dl, dl["slots"]), indent=2, sort_keys=True) + "\n")
    for name, build in BUILDERS.items():
        facts = build()
        doc = bundle_doc(facts)
        header = f"# Generated by corpus/generate_corpus.py ({name}); edit the generator, not this file.\n"
        text = header + yaml.safe_dump(doc, sort_keys=False, width=120, allow_unicode=True)
        (BUNDLES / f"{name}.yaml").write_text(text)
        slots = _slot_entries(facts["layouts"], facts.get("resource_map", {}))
        (EXPECTED / f"{name}.json").write_text(json.dumps(expected_priors(facts, slots), indent=2, sort_keys=True) + "\n")
        ads = ground_truth(facts)
        apps.append({
            "app_id": facts["app_id"], "bundle": f"bundles/{name}.yaml", "rendering": facts.get("rendering", "hierarchy"),
            "ads": ads,
            "evidence": {"manifest": bool(facts["sdks"]) and bool(ads), "layout": bool(slots),
                         "behavioral": has_behavioral(facts)},
        })
    manifest = {"corpus": "adscout-fixtures", "apps": apps}
    (ROOT / "manifest.yaml").write_text(
        "# Corpus manifest: ground-truth ads (id -> ad type), rendering and evidence flags per app.\n"
        + yaml.safe_dump(manifest, sort_keys=False, width=120))
    (ROOT / "experiences").mkdir(exist_ok=True)
    seed_experiences(ROOT / "experiences" / "seed.jsonl")
    print(f"wrote {len(apps)} apps")


if __name__ == "__main__":
    main()
