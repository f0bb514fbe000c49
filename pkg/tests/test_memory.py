import threading

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from adscout.memory import (Experience, ExperienceStore, HashEmbedder, TrajectoryStep, cosine, greedy_dedup,
                            summarize_trajectory, template_summary, tokenize)
from adscout.synthetic import synthetic_memory_texts


def unit_rows(rng, n, dim=16):
    m = rng.normal(size=(n, dim))
    return m / np.linalg.norm(m, axis=1, keepdims=True)


def oracle_dedup(matrix, tau):
    kept = []
    for i in range(len(matrix)):
        if all(float(matrix[i] @ matrix[k]) < tau for k in kept):
            kept.append(i)
    return kept


def test_cosine_hand_cases():
    assert cosine([1, 0], [1, 0]) == 1.0
    assert cosine([1, 0], [0, 2]) == 0.0
    assert cosine([1, 1], [1, 0]) == pytest.approx(1 / np.sqrt(2))
    with pytest.raises(ValueError):
        cosine([0, 0], [1, 0])


def test_embedder_deterministic_and_unit():
    e = HashEmbedder()
    a, b = e.embed("Watch Video Free Coins"), e.embed("watch video free coin")
    assert np.allclose(a, b)
    assert np.linalg.norm(a) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        e.embed("   ")


def test_tokenize_plural_folding():
    assert tokenize("Offers BONUSES glass") == ["offer", "bonuse", "glass"]


def test_experience_validation():
    with pytest.raises(ValueError):
        Experience("x", np.array([2.0, 0.0]), "summary")
    with pytest.raises(ValueError):
        Experience("x", np.array([1.0, 0.0]), "  ")


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(1, 60), tau=st.floats(0.05, 1.0),
       block=st.sampled_from([1, 7, 512]))
def test_greedy_dedup_matches_oracle(seed, n, tau, block):
    m = unit_rows(np.random.default_rng(seed), n, dim=4)
    assert greedy_dedup(m, tau, block) == oracle_dedup(m, tau)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(1, 80), tau=st.floats(0.3, 0.99))
def test_prune_invariants(seed, n, tau):
    rng = np.random.default_rng(seed)
    store = ExperienceStore(HashEmbedder(8))
    for i, row in enumerate(unit_rows(rng, n, dim=8)):
        store.store(Experience(f"e{i}", row, f"s{i}", created_at=float(rng.integers(0, 5))))
    before = list(store.entries)
    store.prune(tau)
    kept = list(store.entries)
    km = np.array([e.embedding for e in kept])
    sims = km @ km.T
    np.fill_diagonal(sims, -1)
    assert (sims < tau).all()
    for e in before:
        if not any(e is k for k in kept):
            assert max(float(e.embedding @ k.embedding) for k in kept) >= tau
    # idempotent
    assert store.prune(tau).entries == tuple(kept)


def test_prune_keeps_oldest():
    store = ExperienceStore()
    old = store.make_experience("More Apps menu", "first", created_at=1.0)
    new = store.make_experience("More Apps menu", "second", created_at=2.0)
    store.store(new)
    store.store(old)
    store.prune(0.95)
    assert [e.summary for e in store.entries] == ["first"]


def test_exact_retrieval_is_brute_force_topk():
    texts, queries = synthetic_memory_texts(300, seed=2, n_queries=20)
    store = ExperienceStore()
    for i, t in enumerate(texts):
        store.store(store.make_experience(t, f"s{i}", created_at=float(i)))
    m = np.array([e.embedding for e in store.entries])
    pos = {id(e): i for i, e in enumerate(store.entries)}
    for q in queries:
        sims = m @ store.embedder.embed(q)
        got = [pos[id(e)] for e, _ in store.retrieve(q, 5)]
        # equal scores may come back in either order
        assert np.allclose(sims[got], np.sort(sims)[::-1][:5], rtol=0, atol=1e-12)
        assert len(set(got)) == 5


def test_retrieve_edge_cases():
    store = ExperienceStore()
    assert store.retrieve("anything") == []
    store.store(store.make_experience("a b c", "s", created_at=0.0))
    assert len(store.retrieve("a", k=10)) == 1
    with pytest.raises(ValueError):
        store.retrieve("a", k=0)


def test_ann_recall_small():
    texts, queries = synthetic_memory_texts(2000, seed=5, n_queries=50)
    exact, ann = ExperienceStore(), ExperienceStore(ann_enabled=True)
    for i, t in enumerate(texts):
        exp = exact.make_experience(t, f"s{i}", created_at=float(i))
        exact.store(exp)
        ann.store(exp)
    hits = 0
    for q in queries:
        truth = {id(e) for e, _ in exact.retrieve(q, 10)}
        hits += sum(id(e) in truth for e, _ in ann.retrieve(q, 10))
    assert hits / (10 * len(queries)) >= 0.9


def test_persistence_round_trip(tmp_path):
    path = tmp_path / "exp.jsonl"
    store = ExperienceStore(path=path)
    for i in range(3):
        store.store(store.make_experience(f"screen {i} More Apps", f"summary {i}", created_at=float(i)))
    again = ExperienceStore.open(path)
    assert [e.summary for e in again.entries] == ["summary 0", "summary 1", "summary 2"]
    assert np.allclose(again.entries[1].embedding, store.entries[1].embedding)
    store.prune(0.5)
    assert len(ExperienceStore.open(path)) == len(store)


def test_bad_header_rejected(tmp_path):
    path = tmp_path / "exp.jsonl"
    path.write_text('{"format": "other", "version": 1, "dim": 256}\n')
    with pytest.raises(ValueError):
        ExperienceStore.open(path)


def test_concurrent_readers_see_consistent_snapshots():
    store = ExperienceStore()
    errors = []

    def writer():
        for i in range(200):
            store.store(store.make_experience(f"item {i} token{i}", f"s{i}", created_at=float(i)))

    def reader():
        for _ in range(200):
            for e, s in store.retrieve("item token", 3):
                if not -1.0 <= s <= 1.0:
                    errors.append(s)

    threads = [threading.Thread(target=writer)] + [threading.Thread(target=reader) for _ in range(3)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert not errors and len(store) == 200


def test_summaries():
    traj = [TrajectoryStep("TouchEvent(x)", "ImageButton", "Open navigation drawer"),
            TrajectoryStep("TouchEvent(y)", "CheckedTextView", "Other App")]
    assert template_summary(traj, "custom") == (
        "Interacting with 'Open navigation drawer' and 'Other App' often triggers advertisement displays.")

    class TwoSentences:
        def summarize(self, instruction, steps):
            assert steps[0] == "Step 1: Touched a 'ImageButton' with text/desc: 'Open navigation drawer'."
            return "Interacting with menus often triggers ads. Extra sentence."

    class Down:
        def summarize(self, instruction, steps):
            raise RuntimeError("offline")

    assert summarize_trajectory(traj, TwoSentences()) == "Interacting with menus often triggers ads."
    assert summarize_trajectory(traj, Down(), "custom") == template_summary(traj, "custom")
    with pytest.raises(ValueError):
        summarize_trajectory([])
