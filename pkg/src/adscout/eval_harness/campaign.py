"""Campaign orchestration: (bundle, policy, seed) cells, aggregated into per-policy tables."""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import yaml

from adscout.app_model import AppBundle, load_bundle
from adscout.backends import OracleSummarizer, ScriptedOracle
from adscout.dynamic_prober import probe_bundle
from adscout.eval_harness.baselines import CriterionConfig, make_policy
from adscout.memory import Experience, ExperienceStore
from adscout.navigator import (
    Backends,
    EpisodeLimits,
    EpisodeReport,
    NavigatorConfig,
    compute_metrics,
    ground_truth_ads,
    run_episode,
)
from adscout.perception import ScriptedCaptioner
from adscout.static_profiler import PriorKnowledgeBase, SdkSignatureConfig, build_knowledge_base, default_config, profile_bundle
from adscout.utg import TransitionGraph

logger = logging.getLogger(__name__)

POLICIES = ("mana", "criterion", "random", "bfs", "keyword")


class CampaignError(ValueError):
    pass


@dataclass(frozen=True)
class CorpusEntry:
    app_id: str
    bundle: Path
    ad_types: dict[str, str]
    rendering: str = "hierarchy"
    evidence: dict[str, bool] = field(default_factory=dict)


def load_manifest(path: str | Path) -> list[CorpusEntry]:
    path = Path(path)
    doc = yaml.safe_load(path.read_text())
    if not isinstance(doc, Mapping) or not isinstance(doc.get("apps"), list):
        raise CampaignError(f"{path}: manifest needs an 'apps' list")
    entries = []
    for i, raw in enumerate(doc["apps"]):
        try:
            bundle = (path.parent / raw["bundle"]).resolve()
            entries.append(CorpusEntry(str(raw["app_id"]), bundle, dict(raw.get("ads") or {}),
                                       str(raw.get("rendering", "hierarchy")), dict(raw.get("evidence") or {})))
        except (KeyError, TypeError) as exc:
            raise CampaignError(f"{path}: apps[{i}] is malformed ({exc})") from exc
    return entries


@dataclass
class CampaignSpec:
    manifest: str
    policies: list[str]
    runs_per_app: int = 5
    seeds: list[int] | None = None
    limits: EpisodeLimits = field(default_factory=EpisodeLimits)
    experiences: str | None = None
    probe_budget: int = 50
    workers: int = 1
    selective_vision: bool = True
    rendering: str | None = None  # restrict to apps with this rendering mode

    def __post_init__(self):
        if self.runs_per_app < 1:
            raise CampaignError("runs_per_app must be >= 1")
        if not self.policies:
            raise CampaignError("a campaign needs at least one policy")
        unknown = [p for p in self.policies if p not in POLICIES]
        if unknown:
            raise CampaignError(f"unknown policies {unknown}")
        if self.seeds is None:
            self.seeds = list(range(self.runs_per_app))
        elif len(self.seeds) != self.runs_per_app:
            raise CampaignError("len(seeds) must equal runs_per_app")

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any], base: Path | None = None) -> "CampaignSpec":
        base = base or Path(".")
        limits = EpisodeLimits(**(doc.get("limits") or {}))
        exp = doc.get("experiences")
        seeds = doc.get("seeds")
        runs = doc.get("runs_per_app", len(seeds) if seeds else 5)
        return cls(
            manifest=str(base / doc["manifest"]),
            policies=list(doc.get("policies") or []),
            runs_per_app=int(runs),
            seeds=None if seeds is None else [int(s) for s in seeds],
            limits=limits,
            experiences=None if exp is None else str(base / exp),
            probe_budget=int(doc.get("probe_budget", 50)),
            workers=int(doc.get("workers", 1)),
            selective_vision=bool(doc.get("selective_vision", True)),
            rendering=doc.get("rendering"),
        )

    @classmethod
    def load(cls, path: str | Path) -> "CampaignSpec":
        path = Path(path)
        return cls.from_dict(yaml.safe_load(path.read_text()), path.parent)


def load_experiences(path: str | Path) -> list[Experience]:
    """Read a JSONL experience file without attaching a store to it."""
    lines = Path(path).read_text().splitlines()
    return [Experience.from_dict(json.loads(ln)) for ln in lines[1:] if ln.strip()]


def prepare_knowledge(bundle: AppBundle, probe_budget: int, seed: int, config: SdkSignatureConfig | None = None):
    """Offline phase: static priors, a random probe, and the correlated network prior."""
    config = config or default_config()
    screen, slot, trigger = profile_bundle(bundle, config)
    graph, _, prior = probe_bundle(bundle, probe_budget, seed, ad_domains=config.ad_domains,
                                   keywords=config.traffic_keywords)
    kb = build_knowledge_base(screen, slot, trigger, prior)
    coarse = TransitionGraph()
    coarse.merge(graph, with_visits=False)
    return kb, coarse


def run_cell(entry: CorpusEntry, bundle: AppBundle, policy: str, seed: int, spec: CampaignSpec,
             seed_experiences: Sequence[Experience]) -> EpisodeReport:
    nav = NavigatorConfig()
    if policy == "mana":
        kb, graph = prepare_knowledge(bundle, spec.probe_budget, seed)
        store = ExperienceStore()
        for exp in seed_experiences:
            store.store(exp)
        backends = Backends(ScriptedOracle(), ScriptedCaptioner(), OracleSummarizer(), spec.selective_vision)
        return run_episode(bundle, kb, graph, store, backends, spec.limits, seed, nav, policy)
    if policy == "criterion":
        backend = make_policy("criterion", seed, CriterionConfig(r_sem_source="caption"))
        backends = Backends(backend, ScriptedCaptioner(), selective_vision=spec.selective_vision)
    else:
        backends = Backends(make_policy(policy, seed))
    nav.store_experiences = False
    # baselines get no priors, only the environment-side success signal
    oracle_kb = PriorKnowledgeBase(success_activities=list(bundle.manifest.registered_success_activities))
    return run_episode(bundle, oracle_kb, TransitionGraph(), None, backends, spec.limits, seed, nav, policy)


def _round(x: float | None) -> float | None:
    return None if x is None else round(x, 6)


def run_campaign(spec: CampaignSpec) -> dict:
    """Run every cell and reduce into per-policy, per-ad-type and per-app tables."""
    entries = load_manifest(spec.manifest)
    if spec.rendering is not None:
        entries = [e for e in entries if e.rendering == spec.rendering]
    bundles: dict[str, AppBundle] = {}
    for e in entries:
        if not e.bundle.exists():
            raise CampaignError(f"missing bundle file {e.bundle}")
        bundles[e.app_id] = load_bundle(e.bundle)
    seeds_exp = load_experiences(spec.experiences) if spec.experiences else []
    truth = {e.app_id: ground_truth_ads(bundles[e.app_id]) for e in entries}
    cells = [(e, p, s) for p in spec.policies for e in entries for s in spec.seeds]

    def work(cell):
        e, p, s = cell
        return run_cell(e, bundles[e.app_id], p, s, spec, seeds_exp)

    if spec.workers > 1:
        with ThreadPoolExecutor(spec.workers) as pool:
            reports = list(pool.map(work, cells))
    else:
        reports = [work(c) for c in cells]

    # single-writer reduction
    out: dict = {"policies": {}, "per_app": {}, "per_ad_type": {}, "runs_per_app": spec.runs_per_app,
                 "seeds": list(spec.seeds), "apps": [e.app_id for e in entries]}
    for p in spec.policies:
        reps = [r for (e, pp, s), r in zip(cells, reports) if pp == p]
        m = compute_metrics(reps, truth)
        out["policies"][p] = {"detection_rate": _round(m.detection_rate), "avg_steps": _round(m.avg_steps),
                              "found": m.found, "total": m.total,
                              "captioned": sum(r.captioned for r in reps),
                              "terminations": _count(r.termination_reason for r in reps)}
        by_type: dict[str, list[int]] = {}
        for (e, pp, s), r in zip(cells, reports):
            if pp != p:
                continue
            for ad in truth[e.app_id]:
                kind = e.ad_types.get(ad, "custom")
                hit = by_type.setdefault(kind, [0, 0])
                hit[0] += ad in r.distinct_ads
                hit[1] += 1
        out["per_ad_type"][p] = {k: _round(v[0] / v[1]) for k, v in sorted(by_type.items())}
        for e in entries:
            app_reps = [r for (ee, pp, s), r in zip(cells, reports) if pp == p and ee.app_id == e.app_id]
            am = compute_metrics(app_reps, truth)
            out["per_app"].setdefault(e.app_id, {})[p] = {"detection_rate": _round(am.detection_rate),
                                                         "avg_steps": _round(am.avg_steps)}
    out["reports"] = [r.to_dict() for r in reports]
    return out


def _count(items) -> dict[str, int]:
    counts: dict[str, int] = {}
    for it in items:
        counts[it] = counts.get(it, 0) + 1
    return dict(sorted(counts.items()))


def report_json(result: Mapping, include_runs: bool = False) -> str:
    doc = dict(result)
    if not include_runs:
        doc.pop("reports", None)
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def report_text(result: Mapping) -> str:
    lines = [f"{'policy':<10} {'detection':>10} {'avg steps':>10} {'found':>7}"]
    for p, row in result["policies"].items():
        steps = "-" if row["avg_steps"] is None else f"{row['avg_steps']:.2f}"
        lines.append(f"{p:<10} {row['detection_rate']:>10.3f} {steps:>10} {row['found']:>3}/{row['total']:<3}")
    kinds = sorted({k for v in result["per_ad_type"].values() for k in v})
    if kinds:
        lines.append("")
        lines.append(f"{'policy':<10} " + " ".join(f"{k:>9}" for k in kinds))
        for p, row in result["per_ad_type"].items():
            lines.append(f"{p:<10} " + " ".join(f"{row.get(k, 0.0):>9.3f}" for k in kinds))
    return "\n".join(lines) + "\n"
