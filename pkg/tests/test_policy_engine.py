import pytest
from hypothesis import given, strategies as st

from adscout.app_model import reset, step
from adscout.perception import Perceiver
from adscout.policy_engine import (EMPTY, SECTION_TITLES, BackendUnavailable, DecisionParseError, EpisodeAbort,
                                   HistoryLine, build_context, check_sections, decide, fallback_decision,
                                   parse_decision, render_prompt, validate)
from adscout.utg import TransitionGraph, describe_action


class Scripted:
    def __init__(self, *replies):
        self.replies = list(replies)
        self.users = []

    def complete(self, system, user):
        self.users.append(user)
        r = self.replies.pop(0)
        if isinstance(r, Exception):
            raise r
        return r


def make_prompt(bundle, graph=None):
    _, state = reset(bundle)
    graph = graph or TransitionGraph()
    ctx = build_context(state, Perceiver().perceive(state), graph, [], None, None)
    return render_prompt(ctx), state, graph


@pytest.mark.parametrize("raw, choice, score", [
    ('{"reasoning": "r", "ad_score": 0.4, "choice": 2}', 2, 0.4),
    ('Sure! {"choice": "3", "ad_score": "0.1"} hope that helps', 3, 0.1),
    ('{"note": {"x": 1}} then {"choice": 1.0, "ad_score": 1}', 1, 1.0),
])
def test_parse_decision(raw, choice, score):
    d = parse_decision(raw)
    assert (d.choice, d.ad_score) == (choice, score)


@pytest.mark.parametrize("raw", ["", "no json here", '{"ad_score": 0.2}', '{"choice": 1.5, "ad_score": 0}',
                                 '{"choice": true, "ad_score": 0}', '{"choice": 1, "ad_score": "high"}'])
def test_parse_decision_rejects(raw):
    with pytest.raises(DecisionParseError):
        parse_decision(raw)


@given(st.integers(-5, 20), st.floats(-1, 2, allow_nan=False), st.integers(1, 10))
def test_validate_ranges(choice, score, n):
    from adscout.policy_engine import Decision

    ok = 0 <= choice < n and 0.0 <= score <= 1.0
    try:
        validate(Decision(choice, score, ""), n)
        assert ok
    except DecisionParseError:
        assert not ok


def test_prompt_has_four_sections_in_order(tiny_bundle):
    prompt, _, _ = make_prompt(tiny_bundle)
    lines = prompt.integrated.splitlines()
    assert [lines.index(t) for t in SECTION_TITLES] == sorted(lines.index(t) for t in SECTION_TITLES)
    assert lines[1] == "- View 0: Type='Button', Text='Free Coins'"
    assert lines.count(EMPTY) == 3  # no knowledge, no history, no experiences
    assert prompt.n_options == 4


def test_check_sections_detects_missing_and_duplicates():
    good = "\n".join(SECTION_TITLES) + "\n"
    check_sections(good)
    with pytest.raises(AssertionError):
        check_sections("\n".join(SECTION_TITLES[:3]))
    with pytest.raises(AssertionError):
        check_sections(good + SECTION_TITLES[0])
    with pytest.raises(AssertionError):
        check_sections("\n".join(reversed(SECTION_TITLES)))


def test_history_line_render():
    assert HistoryLine(3, "aaa", "bbb", "RestartAppEvent()").render() == "- Step 3 [aaa] -> [bbb] RestartAppEvent()"


def test_decide_retries_with_correction(tiny_bundle):
    prompt, _, _ = make_prompt(tiny_bundle)
    backend = Scripted('{"choice": 99, "ad_score": 0.1}', '{"choice": 1, "ad_score": 0.3}')
    d = decide(prompt, backend)
    assert d.choice == 1 and not d.fallback
    assert "previous reply was invalid" in backend.users[1]
    assert "between 0 and 3" in backend.users[1]


def test_decide_falls_back_to_least_visited(tiny_bundle):
    graph = TransitionGraph()
    session, state = reset(tiny_bundle)
    # make the successor of element 0 well known
    for _ in range(3):
        out = step(session, "tap:1")
        graph.record_transition(state, describe_action(state.state_fingerprint, "tap:1", state), out.next)
        step(session, "back")
    prompt, _, _ = make_prompt(tiny_bundle, graph)
    d = decide(prompt, Scripted("garbage", "more garbage"))
    assert d.fallback and d.choice == 1
    assert d.ad_score == pytest.approx(0.10)


def test_fallback_without_context():
    d = fallback_decision(None, 3)
    assert d.choice == 0 and d.fallback


def test_unavailable_backend_aborts(tiny_bundle):
    prompt, _, _ = make_prompt(tiny_bundle)
    with pytest.raises(EpisodeAbort):
        decide(prompt, Scripted(BackendUnavailable("down")))
