"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""

import json
import math
import time

import numpy as np
import pytest

from adscout.app_model import load_bundle
from adscout.backends import OracleSummarizer, ScriptedOracle
from adscout.dynamic_prober import correlate, correlate_bruteforce, extract_ad_traffic
from adscout.eval_harness.campaign import CampaignSpec, prepare_knowledge, run_campaign
from adscout.eval_harness.coverage import closed_form_escape, coverage_experiment, measure_escape
from adscout.eval_harness.replay import replay_episode
from adscout.memory import ExperienceStore
from adscout.navigator import Backends, EpisodeLimits, adaptive_window, run_episode
from adscout.perception import ScriptedCaptioner
from adscout.static_profiler import default_config, profile_bundle
from adscout.synthetic import synthetic_memory_texts, synthetic_trace
from adscout.utg import TransitionGraph
from tests.conftest import BUNDLES, CORPUS, EXPECTED, GOLDENS, SEED_EXPERIENCES

BASELINES = ("criterion", "random", "bfs", "keyword")


def topk_matches(matrix, q, got, k, tol=1e-12):
    """Brute-force top-k check that treats scores within ``tol`` as ties."""
    sims = matrix @ q
    want = np.sort(sims)[::-1][:k]
    if len(got) != len(want) or len(set(got)) != len(got):
        return False
    return bool(np.allclose(sims[got], want, rtol=0, atol=tol))


@pytest.fixture
def verdict(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\nCRITERION {n}: {'PASS' if ok else 'FAIL'} ({detail})")
        assert ok, detail

    return emit


def test_c01_profiler_fixtures(verdict):
    start = time.perf_counter()
    cfg = default_config()
    diffs = []
    for path in sorted(BUNDLES.glob("*.yaml")):
        screen, slot, trigger = profile_bundle(load_bundle(path), cfg)
        got = {"screen": screen.to_dict(), "slot": slot.to_dict(), "trigger": trigger.to_dict()}
        if got != json.loads((EXPECTED / f"{path.stem}.json").read_text()):
            diffs.append(path.stem)
        if path.stem == "superclass_chain":
            chain_ok = "ResultActivity" in trigger.methods_by_activity
    elapsed = time.perf_counter() - start
    ok = not diffs and chain_ok and elapsed < 5.0
    verdict(1, ok, f"{len(diffs)} diffs over 20 bundles, 2-hop attribution {chain_ok}, {elapsed:.2f}s")


def test_c02_network_correlation(verdict):
    cfg = default_config()
    tp = fp = fn = 0
    late = linked = 0
    mismatches = 0
    for seed in range(1000):
        tr = synthetic_trace(seed)
        traffic = extract_ad_traffic(tr.syslog, cfg.ad_domains, cfg.traffic_keywords)
        prior = correlate(tr.events, traffic, 5.0)
        mismatches += prior != correlate_bruteforce(tr.events, traffic, 5.0)
        got = {(ln.url, ln.traffic_timestamp): tr.events.index(ln.event) for ln in prior.links}
        for (url, ts), owner in zip(traffic, tr.truth):
            g = got.get((url, ts))
            if owner is None:
                fp += g is not None
            elif g == owner:
                tp += 1
            else:
                fn += 1
                fp += g is not None
        linked += len(prior.links)
        late += sum(1 for ln in prior.links if 3.0 <= ln.lag_seconds < 5.0)
    precision, recall = tp / (tp + fp), tp / (tp + fn)
    frac = late / linked
    ok = precision == 1.0 and recall == 1.0 and mismatches == 0 and abs(frac - 0.40) <= 0.02
    verdict(2, ok, f"precision {precision:.3f}, recall {recall:.3f}, sweep/brute mismatches {mismatches}/1000, "
                   f"late-lag fraction {frac:.4f}")


def test_c03_ema(verdict):
    rng = np.random.default_rng(7)
    n = 100_000
    s = rng.random(n)
    alpha = rng.random(n)
    bounded = True
    for _ in range(10):
        s = (1 - alpha) * s + alpha * rng.random(n)
        bounded &= bool((s >= 0).all() and (s <= 1).all())
    # the graph implementation on a sample of those sequences
    g = TransitionGraph()
    for i in range(200):
        g.add_node(str(i))
        for _ in range(10):
            v = g.update_score(str(i), float(rng.random()), float(rng.random()))
            bounded &= 0.0 <= v <= 1.0
    g0 = TransitionGraph(initial_score=0.37)
    g0.add_node("a")
    identity = all(g0.update_score("a", x, 0.0) == 0.37 for x in (0.0, 0.5, 1.0))
    replacement = all(g0.update_score("a", x, 1.0) == x for x in (0.2, 0.9, 0.0))
    gh = TransitionGraph(initial_score=0.05)
    gh.add_node("h")
    hand = gh.update_score("h", 0.8, 0.3)
    ok = bounded and identity and replacement and abs(hand - 0.275) < 1e-12
    verdict(3, ok, f"bounded {bounded}, alpha=0 identity {identity}, alpha=1 replacement {replacement}, "
                   f"hand case {hand:.15f}")


def test_c04_adaptive_window(verdict):
    bad = []
    for k_base in range(1, 11):
        for distinct in range(1, k_base + 1):
            states = [f"s{i % distinct}" for i in range(k_base)]
            want = math.ceil(1.5 * k_base) if distinct <= 2 else k_base
            if adaptive_window(states, k_base) != want:
                bad.append((k_base, distinct))
    verdict(4, not bad, f"{55 - len(bad)}/55 grid points match")


def test_c05_memory(verdict):
    start = time.perf_counter()
    texts, queries = synthetic_memory_texts(10_000, seed=11, n_queries=100)
    store = ExperienceStore(tau=0.95)
    for i, t in enumerate(texts):
        store.store(store.make_experience(t, f"s{i}", created_at=float(i)))
    everything = list(store.entries)
    full = np.array([e.embedding for e in everything])

    # exact retrieval against brute force, before pruning
    exact_ok = True
    pos = {id(e): i for i, e in enumerate(store.entries)}
    for q in queries[:50]:
        exact_ok &= topk_matches(full, store.embedder.embed(q), [pos[id(e)] for e, _ in store.retrieve(q, 10)], 10)

    # ANN recall@10
    ann = ExperienceStore(ann_enabled=True)
    for e in everything:
        ann.store(e)
    hits = 0
    for q in queries:
        truth = {id(e) for e, _ in store.retrieve(q, 10)}
        hits += sum(id(e) in truth for e, _ in ann.retrieve(q, 10))
    recall = hits / (10 * len(queries))

    store.prune(0.95)
    kept = list(store.entries)
    kept_ids = {id(e) for e in kept}
    km = np.array([e.embedding for e in kept])
    max_kept = -1.0
    for i in range(0, len(km), 1024):
        block = km[i:i + 1024] @ km.T
        for r in range(block.shape[0]):
            block[r, i + r] = -1.0
        max_kept = max(max_kept, float(block.max()))
    dropped = np.array([e.embedding for e in everything if id(e) not in kept_ids])
    witnessed = True
    for i in range(0, len(dropped), 1024):
        witnessed &= bool(((dropped[i:i + 1024] @ km.T).max(axis=1) >= 0.95).all())
    elapsed = time.perf_counter() - start
    ok = max_kept < 0.95 and witnessed and exact_ok and recall >= 0.9 and elapsed < 60
    verdict(5, ok, f"kept {len(kept)}/10000, max kept-pair cosine {max_kept:.6f}, dropped witnessed {witnessed}, "
                   f"exact top-k {exact_ok}, ANN recall@10 {recall:.3f}, {elapsed:.1f}s")


def test_c06_prompt_goldens(verdict):
    rep = replay_episode(BUNDLES / "dict_loop.yaml", GOLDENS / "dict_loop_transcript.jsonl", SEED_EXPERIENCES).report
    same = [p.text == (GOLDENS / f"dict_loop_prompt_step{i}.txt").read_text() for i, p in enumerate(rep.prompts, 1)]
    first = rep.prompts[0].integrated
    structure = (first.count("(visited:") >= 2 and "ad_score:" in first and "(b) Recent History" in first
                 and len(rep.prompts[0].context.experiences) == 3)
    ok = len(same) == 2 and all(same) and structure
    verdict(6, ok, f"byte-exact {same}, structure {structure}")


def test_c07_replay_end_to_end(verdict):
    summary = ("Interacting with navigation options that lead to external app suggestions often triggers "
               "advertisement displays.")
    result = replay_episode(BUNDLES / "dict_loop.yaml", GOLDENS / "dict_loop_transcript.jsonl", SEED_EXPERIENCES)
    rep = result.report
    replay_ok = (rep.distinct_ads == ["play_redirect"] and rep.steps_taken == 2 and rep.experiences_added == 1
                 and result.store.entries[-1].summary == summary and rep.termination_reason == "ad_budget")
    bundle = load_bundle(BUNDLES / "no_ad.yaml")
    kb, graph = prepare_knowledge(bundle, 50, 0)
    backends = Backends(ScriptedOracle(), ScriptedCaptioner(), OracleSummarizer())
    no_ad = run_episode(bundle, kb, graph, ExperienceStore(), backends, EpisodeLimits(max_steps=60), 0)
    cap_ok = no_ad.steps_taken == 60 and no_ad.termination_reason == "step_budget" and not no_ad.distinct_ads
    verdict(7, replay_ok and cap_ok,
            f"dict_loop: {rep.steps_taken} steps, ads {rep.distinct_ads}, {rep.termination_reason}; "
            f"no_ad: {no_ad.steps_taken} steps, {no_ad.termination_reason}")


def test_c08_coverage_dominance(verdict):
    start = time.perf_counter()
    stats = coverage_experiment(loop_sizes=range(3, 11), n_seeds=100, budget=60, lam=0.1)
    means = {p: stats.mean(p) for p in stats.policies}
    dominance = all(means["criterion"] > means[b] and stats.comparisons[b][2] < 0.01 for b in BASELINES[1:])
    worst = 0
    for lam in (0.05, 0.1, 0.2):
        for loop in range(3, 11):
            for r_loop, r_exit in ((0.5, 0.2), (0.9, 0.1), (0.6, 0.45), (0.35, 0.3)):
                err = abs(measure_escape(loop, r_loop, r_exit, lam) - closed_form_escape(r_loop, r_exit, lam))
                worst = max(worst, err)
    elapsed = time.perf_counter() - start
    ok = dominance and worst <= 1 and elapsed < 120
    ps = ", ".join(f"{b} p={stats.comparisons[b][2]:.2e}" for b in BASELINES[1:])
    verdict(8, ok, f"mean coverage {json.dumps({k: round(v, 3) for k, v in means.items()})}; {ps}; "
                   f"max escape error {worst} steps; {elapsed:.1f}s")


def test_c09_corpus_ordering(verdict, corpus_campaign):
    rows = corpus_campaign["policies"]
    mana = rows["mana"]
    ok = all(mana["avg_steps"] < rows[b]["avg_steps"] and mana["detection_rate"] > rows[b]["detection_rate"]
             for b in BASELINES)
    detail = "; ".join(f"{p} det={r['detection_rate']:.3f} steps={r['avg_steps']:.2f}" for p, r in rows.items())
    verdict(9, ok, detail)


def test_c10_selective_vision(verdict):
    results = {}
    for selective in (True, False):
        spec = CampaignSpec(str(CORPUS / "manifest.yaml"), ["mana"], runs_per_app=5,
                            experiences=str(SEED_EXPERIENCES), selective_vision=selective, rendering="hierarchy")
        results[selective] = run_campaign(spec)
    sel, full = results[True], results[False]
    ratio = sel["policies"]["mana"]["captioned"] / full["policies"]["mana"]["captioned"]
    same = [(r["app_id"], r["seed"], sorted(r["distinct_ads"])) for r in sel["reports"]] == \
           [(r["app_id"], r["seed"], sorted(r["distinct_ads"])) for r in full["reports"]]
    ok = ratio <= 0.40 and same
    verdict(10, ok, f"captions {sel['policies']['mana']['captioned']} vs {full['policies']['mana']['captioned']} "
                    f"(ratio {ratio:.3f}), identical detections {same}")
