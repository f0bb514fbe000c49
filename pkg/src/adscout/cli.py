"""Command-line entry point: profile, probe, explore, campaign, export-utg."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from adscout.app_model import BundleError, load_bundle
from adscout.backends import ChatCompletionBackend, OracleSummarizer, RecordingBackend, ReplayBackend, ScriptedOracle, Transcript
from adscout.config import AdscoutConfig
from adscout.dynamic_prober import probe_bundle
from adscout.eval_harness.baselines import CriterionConfig, make_policy
from adscout.eval_harness.campaign import CampaignError, CampaignSpec, load_experiences, report_json, report_text, run_campaign
from adscout.memory import ExperienceStore
from adscout.navigator import Backends, NavigatorConfig, run_episode
from adscout.perception import ScriptedCaptioner
from adscout.static_profiler import PriorKnowledgeBase, build_knowledge_base, profile_bundle
from adscout.utg import TransitionGraph

log = logging.getLogger("adscout")


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True)


def cmd_profile(args, cfg: AdscoutConfig) -> int:
    bundle = load_bundle(args.bundle, strict=not args.lenient)
    screen, slot, trigger = profile_bundle(bundle, cfg.sdk_config())
    print(_dump({"screen": screen.to_dict(), "slot": slot.to_dict(), "trigger": trigger.to_dict()}))
    return 0


def cmd_probe(args, cfg: AdscoutConfig) -> int:
    bundle = load_bundle(args.bundle)
    sdk = cfg.sdk_config()
    graph, trace, prior = probe_bundle(bundle, args.budget or cfg.probe_budget, args.seed, ad_domains=sdk.ad_domains,
                                       keywords=sdk.traffic_keywords, delta_seconds=cfg.delta_seconds,
                                       event_interval=cfg.event_interval_seconds)
    if args.utg:
        Path(args.utg).write_text(graph.export("json"))
    print(_dump({"nodes": len(graph.nodes), "edges": len(graph.edges), "events": len(trace.events),
                 "network_prior": prior.to_dict()}))
    return 0


def _backends(args, cfg: AdscoutConfig):
    if args.policy != "mana":
        if args.policy == "criterion":
            return Backends(make_policy("criterion", args.seed, CriterionConfig(cfg.lam, "caption")), ScriptedCaptioner())
        return Backends(make_policy(args.policy, args.seed))
    if args.backend == "scripted":
        return Backends(ScriptedOracle(), ScriptedCaptioner(), OracleSummarizer())
    if args.backend == "replay":
        if not args.transcript:
            raise SystemExit("--backend replay needs --transcript")
        replay = ReplayBackend(Transcript.load(args.transcript))
        return Backends(replay, ScriptedCaptioner(), replay)
    r = cfg.remote
    if not r.url or not r.model:
        raise SystemExit("--backend remote needs remote.url and remote.model in the config file")
    remote = ChatCompletionBackend(r.url, r.model, r.temperature, r.token_env, r.timeout)
    if args.record:
        rec = RecordingBackend(remote, Transcript(path=args.record))
        return Backends(rec, rec, rec)
    return Backends(remote, remote, remote)


def cmd_explore(args, cfg: AdscoutConfig) -> int:
    bundle = load_bundle(args.bundle)
    for name in ("max_steps", "max_seconds", "max_ads"):
        value = getattr(args, name)
        if value is not None:
            setattr(cfg, name, value)
    backends = _backends(args, cfg)
    nav = NavigatorConfig(alpha=cfg.alpha, k_base=cfg.k_base)
    graph = TransitionGraph()
    store = None
    if args.policy == "mana":
        sdk = cfg.sdk_config()
        screen, slot, trigger = profile_bundle(bundle, sdk)
        probed, _, prior = probe_bundle(bundle, cfg.probe_budget, args.seed, ad_domains=sdk.ad_domains,
                                        keywords=sdk.traffic_keywords, delta_seconds=cfg.delta_seconds)
        kb = build_knowledge_base(screen, slot, trigger, prior)
        graph.merge(probed, with_visits=False)
        store = ExperienceStore(tau=cfg.tau)
        if args.experiences:
            for exp in load_experiences(args.experiences):
                store.store(exp)
    else:
        kb = PriorKnowledgeBase(success_activities=list(bundle.manifest.registered_success_activities))
        nav.store_experiences = False
    report = run_episode(bundle, kb, graph, store, backends, cfg.limits, args.seed, nav, args.policy)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(_dump(report.to_dict()) + "\n")
        (out / "episode.jsonl").write_text(report.log_lines())
        (out / "utg.json").write_text(graph.export("json"))
        if store is not None and args.policy == "mana":
            store.save(out / "experiences.jsonl")
    summary = {k: v for k, v in report.to_dict().items() if k != "trajectory"}
    print(_dump(summary))
    return 0 if report.termination_reason != "abort" else 3


def cmd_campaign(args, cfg: AdscoutConfig) -> int:
    spec = CampaignSpec.load(args.spec)
    if args.workers:
        spec.workers = args.workers
    result = run_campaign(spec)
    text = report_text(result)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(report_json(result, include_runs=args.runs))
        (out / "report.txt").write_text(text)
    print(text, end="")
    return 0


def cmd_export_utg(args, cfg: AdscoutConfig) -> int:
    path = Path(args.run)
    if path.is_dir():
        path = path / "utg.json"
    graph = TransitionGraph.load(path.read_text())
    print(graph.export(args.format), end="" if args.format == "dot" else "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="adscout", description="Ad-discovery exploration over declarative app bundles.")
    p.add_argument("--config", help="YAML config file (alpha, tau, k_base, lam, limits, signatures, remote)")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("profile", help="static priors of a bundle")
    sp.add_argument("bundle")
    sp.add_argument("--lenient", action="store_true", help="tolerate unresolved layout ids")
    sp.set_defaults(func=cmd_profile)

    sp = sub.add_parser("probe", help="random probing plus network correlation")
    sp.add_argument("bundle")
    sp.add_argument("--budget", type=int)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--utg", help="write the coarse UTG here")
    sp.set_defaults(func=cmd_probe)

    sp = sub.add_parser("explore", help="run one exploration episode")
    sp.add_argument("bundle")
    sp.add_argument("--policy", default="mana", choices=["mana", "criterion", "random", "bfs", "keyword"])
    sp.add_argument("--backend", default="scripted", choices=["scripted", "replay", "remote"])
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--transcript", help="transcript to replay")
    sp.add_argument("--record", help="record remote replies to this transcript")
    sp.add_argument("--experiences", help="JSONL experience file to seed memory")
    sp.add_argument("--max-steps", type=int)
    sp.add_argument("--max-seconds", type=float)
    sp.add_argument("--max-ads", type=int)
    sp.add_argument("--out", help="run directory for report, log and UTG")
    sp.set_defaults(func=cmd_explore)

    sp = sub.add_parser("campaign", help="run a campaign spec")
    sp.add_argument("spec")
    sp.add_argument("--out")
    sp.add_argument("--workers", type=int)
    sp.add_argument("--runs", action="store_true", help="include per-episode reports in report.json")
    sp.set_defaults(func=cmd_campaign)

    sp = sub.add_parser("export-utg", help="print a run's UTG")
    sp.add_argument("run", help="run directory or utg.json")
    sp.add_argument("--format", default="json", choices=["json", "dot"])
    sp.set_defaults(func=cmd_export_utg)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = AdscoutConfig.load(args.config)
        return args.func(args, cfg)
    except (BundleError, CampaignError, FileNotFoundError, ValueError) as exc:
        print(f"adscout: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
