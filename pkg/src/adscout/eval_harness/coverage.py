"""Aliased-loop app family, loop-escape measurement and the coverage-dominance experiment."""

from __future__ import annotations

import logging
import math
import random
from dataclasses import dataclass, field
from typing import Sequence

from scipy.stats import binomtest

from adscout.app_model import AppBundle, Session, bundle_from_dict
from adscout.eval_harness.baselines import BASELINES, CriterionConfig, make_policy, policy_criterion
from adscout.navigator import Backends, EpisodeLimits, NavigatorConfig, run_episode
from adscout.perception import Perceiver
from adscout.utg import TransitionGraph, describe_action

logger = logging.getLogger(__name__)

LOOP_BUTTONS = ("Previous", "Play", "Next", "Repeat", "Shuffle", "Favorite")
DECOY_POOL = ("Settings", "About", "Rate", "Share", "Help", "Profile", "History", "Feedback",
              "Language", "Theme", "Remove Ads", "Notifications")
HUB_ACTIVITY = "MainActivity"


@dataclass(frozen=True)
class StructuralClass:
    digest: str
    members: tuple[str, ...]


def structural_classes(bundle: AppBundle) -> list[StructuralClass]:
    """Group script states whose observations share the same metadata digest."""
    groups: dict[str, list[str]] = {}
    session = Session(bundle)
    for sid in sorted(bundle.behavior.states):
        session.state_id = sid
        groups.setdefault(session.observe().canonical, []).append(sid)
    return [StructuralClass(d, tuple(m)) for d, m in sorted(groups.items(), key=lambda kv: kv[1])]


def _w(cls, bounds, *, text=None, desc=None, clickable=True, gain=None, depth=1):
    w = {"class": cls, "bounds": list(bounds), "clickable": clickable, "depth": depth}
    if text:
        w["text"] = text
    if desc:
        w["desc"] = desc
    if gain is not None:
        w["semantic_gain"] = gain
    return w


def _rows(labels, gains, top=300, height=120):
    return [_w("TextView", (0, top + i * height, 1080, top + (i + 1) * height), text=lab, gain=g)
            for i, (lab, g) in enumerate(zip(labels, gains))]


def aliased_loop_app(loop_size: int, seed: int, r_loop: float = 0.2, r_exit: float = 0.6,
                     n_decoys: int = 8) -> AppBundle:
    """Entry loop of identical player pages; a semantically marked exit leads to a hub with three ad paths."""
    if loop_size < 2:
        raise ValueError("an aliased loop needs at least two structurally identical pages")
    rng = random.Random(seed)
    buttons = list(LOOP_BUTTONS) + ["Menu"]
    rng.shuffle(buttons)
    loop_widgets = [_w("LinearLayout", (0, 0, 1080, 1920), clickable=False, depth=0)]
    for i, name in enumerate(buttons):
        x = 60 + (i % 4) * 240
        y = 1300 + (i // 4) * 250
        loop_widgets.append(_w("ImageButton", (x, y, x + 180, y + 180), desc=name,
                               gain=r_exit if name == "Menu" else r_loop))
    states: dict = {}
    for p in range(loop_size):
        trans = {}
        for i, name in enumerate(buttons, start=1):
            if name == "Next":
                trans[f"tap:{i}"] = f"loop_{(p + 1) % loop_size}"
            elif name == "Previous":
                trans[f"tap:{i}"] = f"loop_{(p - 1) % loop_size}"
            elif name == "Menu":
                trans[f"tap:{i}"] = "hub"
            else:
                trans[f"tap:{i}"] = f"loop_{p}"
        states[f"loop_{p}"] = {"activity": "PlayerActivity", "widgets": loop_widgets, "transitions": trans}

    decoys = rng.sample(DECOY_POOL, n_decoys)
    entries = decoys + ["More Apps", "Daily Bonus", "Gift Box"]
    rng.shuffle(entries)
    gains = [0.8 if e in ("More Apps", "Daily Bonus", "Gift Box") else (0.02 if e == "Remove Ads" else 0.1)
             for e in entries]
    hub_widgets = [_w("FrameLayout", (0, 0, 1080, 1920), clickable=False, depth=0)] + _rows(entries, gains, 200, 140)
    hub_trans: dict = {"back": "loop_0"}
    triggers = []
    for i, name in enumerate(entries, start=1):
        key = f"tap:{i}"
        if name == "More Apps":
            hub_trans[key] = "store"
            triggers.append({"ad_id": "more_apps", "host_state": "store", "context": [key], "ad_type": "custom"})
        elif name == "Daily Bonus":
            hub_trans[key] = "bonus"
        elif name == "Gift Box":
            hub_trans[key] = "gift"
        else:
            page = f"decoy_{i}"
            hub_trans[key] = page
            sub = [f"{name} option {j + 1}" for j in range(4)]
            states[page] = {
                "activity": "SettingsActivity",
                "widgets": [_w("FrameLayout", (0, 0, 1080, 1920), clickable=False, depth=0),
                            _w("TextView", (0, 100, 1080, 200), text=name, clickable=False)]
                + _rows(sub, [0.1] * 4),
                "transitions": {"back": "hub", **{f"tap:{j + 2}": page for j in range(4)}},
            }
    states["hub"] = {"activity": HUB_ACTIVITY, "widgets": hub_widgets, "transitions": hub_trans}
    states["store"] = {"activity": "com.android.vending.AssetBrowserActivity", "external": True,
                       "widgets": [_w("FrameLayout", (0, 0, 1080, 1920), clickable=False, depth=0),
                                   _w("Button", (40, 400, 1040, 520), text="Install")]}
    states["bonus"] = {
        "activity": "BonusActivity",
        "widgets": [_w("FrameLayout", (0, 0, 1080, 1920), clickable=False, depth=0)]
        + _rows(["Claim", "Watch Video", "Rules"], [0.1, 0.8, 0.1]),
        "transitions": {"back": "hub", "tap:1": "bonus", "tap:2": "video", "tap:3": "bonus"},
    }
    states["video"] = {"activity": "BonusActivity",
                       "widgets": [_w("VideoView", (0, 0, 1080, 1920), clickable=False, depth=0),
                                   _w("ImageButton", (960, 40, 1060, 140), desc="Close", gain=0.1)],
                       "transitions": {"back": "bonus", "tap:1": "bonus"}}
    triggers.append({"ad_id": "bonus_video", "host_state": "video", "ad_type": "popup"})
    states["gift"] = {
        "activity": "GiftActivity",
        "widgets": [_w("FrameLayout", (0, 0, 1080, 1920), clickable=False, depth=0)]
        + _rows(["Open Gift", "Gift History"], [0.8, 0.1]),
        "transitions": {"back": "hub", "tap:1": "gift_open", "tap:2": "gift"},
    }
    states["gift_open"] = {"activity": "GiftActivity",
                           "widgets": [_w("FrameLayout", (0, 0, 1080, 1920), clickable=False, depth=0),
                                       _w("TextView", (0, 600, 1080, 800), text="You got a gift", clickable=False)],
                           "transitions": {"back": "gift"}}
    triggers.append({"ad_id": "gift_banner", "host_state": "gift_open", "ad_type": "embedded"})

    activities = sorted({s["activity"] for s in states.values() if not s.get("external")})
    doc = {
        "app_id": f"family.loop{loop_size}.s{seed}",
        "manifest": {"package": f"family.loop{loop_size}.s{seed}", "activities": activities},
        "behavior": {"initial_state": "loop_0", "states": states, "ad_triggers": triggers},
    }
    return bundle_from_dict(doc, source=doc["app_id"])


def escape_app(loop_size: int, r_loop: float, r_exit: float) -> AppBundle:
    """Loop pages with one looping action (index 0) and one exit (index 1)."""
    widgets = [_w("ImageButton", (100, 1300, 300, 1500), desc="Next", gain=r_loop, depth=0),
               _w("ImageButton", (400, 1300, 600, 1500), desc="Menu", gain=r_exit, depth=0)]
    states = {f"loop_{p}": {"activity": "PlayerActivity", "widgets": widgets,
                            "transitions": {"tap:0": f"loop_{(p + 1) % loop_size}", "tap:1": "outside"}}
              for p in range(loop_size)}
    states["outside"] = {"activity": "MainActivity",
                         "widgets": [_w("TextView", (0, 0, 1080, 200), text="Home", clickable=False, depth=0)]}
    doc = {"app_id": f"escape.loop{loop_size}",
           "manifest": {"package": "escape", "activities": ["PlayerActivity", "MainActivity"]},
           "behavior": {"initial_state": "loop_0", "states": states}}
    return bundle_from_dict(doc)


def closed_form_escape(r_loop: float, r_exit: float, lam: float) -> int:
    """Loop steps before the penalty flips the argmax to the exit."""
    if lam <= 0:
        raise ValueError("lambda must be > 0 for a finite escape time")
    # tolerance keeps exact ratios like 0.3 / 0.1 from rounding up
    return max(0, math.ceil((r_loop - r_exit) / lam - 1e-9))


def measure_escape(loop_size: int, r_loop: float, r_exit: float, lam: float, max_steps: int = 200) -> int:
    """Number of loop actions the criterion policy takes before choosing the exit."""
    bundle = escape_app(loop_size, r_loop, r_exit)
    session = Session(bundle)
    graph = TransitionGraph()
    perceiver = Perceiver()
    cfg = CriterionConfig(lam=lam)
    state = session.observe()
    graph.mark_visit(state)
    for t in range(max_steps):
        el = policy_criterion(state, perceiver.perceive(state), graph, cfg)
        if el.action_key == "tap:1":
            return t
        outcome = session.step(el.action_key)
        graph.record_transition(state, describe_action(state.state_fingerprint, el.action_key, state), outcome.next)
        state = outcome.next
    raise RuntimeError("criterion policy never escaped the loop")


def sign_test(a: Sequence[float], b: Sequence[float]) -> tuple[int, int, float]:
    """One-sided paired sign test of ``a > b``; returns (wins, losses, p-value). Ties are dropped."""
    if len(a) != len(b):
        raise ValueError("paired samples must have equal length")
    wins = sum(1 for x, y in zip(a, b) if x > y)
    losses = sum(1 for x, y in zip(a, b) if x < y)
    if wins + losses == 0:
        return 0, 0, 1.0
    return wins, losses, float(binomtest(wins, wins + losses, 0.5, alternative="greater").pvalue)


@dataclass
class CoverageStats:
    policies: list[str]
    coverage: dict[str, list[int]] = field(default_factory=dict)
    escaped: dict[str, list[bool]] = field(default_factory=dict)
    comparisons: dict[str, tuple[int, int, float]] = field(default_factory=dict)

    def mean(self, policy: str) -> float:
        vals = self.coverage[policy]
        return sum(vals) / len(vals)

    def escape_rate(self, policy: str) -> float:
        vals = self.escaped[policy]
        return sum(vals) / len(vals)

    def to_dict(self) -> dict:
        return {
            "mean_coverage": {p: self.mean(p) for p in self.policies},
            "escape_rate": {p: self.escape_rate(p) for p in self.policies},
            "sign_tests": {p: {"wins": w, "losses": l, "p": pv} for p, (w, l, pv) in self.comparisons.items()},
        }


def coverage_experiment(loop_sizes: Sequence[int] = tuple(range(3, 11)), policies: Sequence[str] = ("criterion",) + BASELINES,
                        budget: int = 60, n_seeds: int = 100, lam: float = 0.1, r_loop: float = 0.2,
                        r_exit: float = 0.6, reference: str = "criterion") -> CoverageStats:
    """Run every policy on the same generated app per seed and compare coverage against ``reference``."""
    if not loop_sizes or min(loop_sizes) < 2:
        raise ValueError("the family needs loops of at least two aliased pages")
    if budget < 1 or n_seeds < 1:
        raise ValueError("budget and n_seeds must be >= 1")
    stats = CoverageStats(list(policies))
    limits = EpisodeLimits(max_steps=budget, max_seconds=1e9)
    nav = NavigatorConfig(store_experiences=False)
    for p in policies:
        stats.coverage[p] = []
        stats.escaped[p] = []
    for seed in range(n_seeds):
        bundle = aliased_loop_app(loop_sizes[seed % len(loop_sizes)], seed, r_loop, r_exit)
        for p in policies:
            backend = make_policy(p, seed, CriterionConfig(lam=lam))
            rep = run_episode(bundle, None, TransitionGraph(), None, Backends(backend), limits, seed, nav, p)
            stats.coverage[p].append(len(rep.distinct_ads))
            stats.escaped[p].append(any(r["activity"] == HUB_ACTIVITY for r in rep.trajectory))
    if reference in policies:
        for p in policies:
            if p != reference:
                stats.comparisons[p] = sign_test(stats.coverage[reference], stats.coverage[p])
    return stats
