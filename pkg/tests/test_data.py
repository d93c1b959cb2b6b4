import json

import pytest
from hypothesis import given, settings, strategies as st

from daud.data import (
    Corpus, EngagementRecord, NewsItem, Setting, SplitPlan, VeracityLabel, assert_no_leakage, build_split,
    common_users, corpus_records, load_corpus, parse_records, save_corpus,
)
from daud.errors import (
    DanglingReference, DataError, EmptyClass, InsufficientDomains, LeakageError, MissingField, UnknownDomain,
    UnknownLabel,
)

from conftest import small_corpus


def _lines(*recs):
    return [json.dumps(r) for r in recs]


def test_parse_minimal_records():
    c = parse_records(_lines(
        {"kind": "news", "id": "n1", "domain": "health", "text": "hello", "label": "Fake", "timestamp": 5},
        {"kind": "engagement", "user_id": "u", "news_id": "n1", "comment": "hi"},
    ))
    assert len(c) == 1
    assert c.news["n1"].label is VeracityLabel.FAKE
    assert c.engagements[0].timestamp is None
    assert c.users == {"u": (0,)}


def test_dangling_reference():
    with pytest.raises(DanglingReference) as ei:
        parse_records(_lines({"kind": "engagement", "user_id": "u", "news_id": "zzz"}))
    assert "zzz" in str(ei.value)


def test_missing_field_and_bad_label():
    with pytest.raises(MissingField):
        parse_records(_lines({"kind": "news", "id": "n1", "domain": "d", "label": "true"}))
    with pytest.raises(UnknownLabel):
        parse_records(_lines({"kind": "news", "id": "n1", "domain": "d", "text": "t", "label": "maybe"}))


def test_duplicate_engagements_keep_earliest(caplog):
    c = parse_records(_lines(
        {"kind": "news", "id": "n1", "domain": "d", "text": "t", "label": "true"},
        {"kind": "engagement", "user_id": "u", "news_id": "n1", "comment": "late", "timestamp": 9},
        {"kind": "engagement", "user_id": "u", "news_id": "n1", "comment": "early", "timestamp": 3},
    ))
    assert [e.comment for e in c.engagements] == ["early"]


def test_empty_text_rejected():
    with pytest.raises(DataError):
        NewsItem("x", "d", "", VeracityLabel.TRUE)


def test_duplicate_news_id_rejected():
    n = NewsItem("x", "d", "t", VeracityLabel.TRUE)
    with pytest.raises(DataError):
        Corpus([n, n])


def test_round_trip(tmp_path, corpus):
    path = tmp_path / "c.jsonl"
    save_corpus(corpus, path)
    again = load_corpus(path)
    assert again == corpus
    assert corpus_records(again) == corpus_records(corpus)


def test_user_engagements_time_ordered(corpus):
    seq = corpus.user_engagements("user0")
    stamps = [e.timestamp for e in seq]
    assert stamps == sorted(stamps)


def test_common_users(corpus):
    a, b = corpus.view(["alpha"]), corpus.view(["beta"])
    assert common_users(a, b) <= corpus.user_ids()


def test_unseen_split_holds_out_target(corpus):
    plan = build_split(corpus, "unseen", "alpha", seed=3)
    assert {corpus.news[i].domain for i in plan.test} == {"alpha"}
    assert all(corpus.news[i].domain != "alpha" for i in plan.train | plan.val)
    assert plan.train | plan.val | plan.test == set(corpus.news)


def test_general_split_uses_target_portion(corpus):
    plan = build_split(corpus, Setting.GENERAL, "alpha", ratios=(0.5, 0.0, 0.5), seed=0)
    assert {corpus.news[i].domain for i in plan.test} == {"alpha"}
    assert any(corpus.news[i].domain == "alpha" for i in plan.train)


def test_split_deterministic(corpus):
    assert build_split(corpus, "unseen", "beta", seed=7) == build_split(corpus, "unseen", "beta", seed=7)


def test_split_errors(corpus):
    with pytest.raises(UnknownDomain):
        build_split(corpus, "unseen", "nowhere")
    with pytest.raises(InsufficientDomains):
        build_split(corpus.view(["alpha", "beta"]), "unseen", "alpha")
    one_class = Corpus([NewsItem("a", "x", "t", VeracityLabel.TRUE), NewsItem("b", "y", "t", VeracityLabel.TRUE),
                        NewsItem("c", "y", "t", VeracityLabel.FAKE)])
    with pytest.raises(EmptyClass):
        build_split(one_class, "general", "y")


def test_poisoned_plan_trips_guard(corpus):
    plan = build_split(corpus, "unseen", "alpha")
    poisoned = SplitPlan(plan.setting, plan.target_domain, plan.train | {"alpha0"}, plan.val,
                         plan.test - {"alpha0"}, plan.seed)
    with pytest.raises(LeakageError):
        assert_no_leakage(poisoned, corpus)


def test_overlapping_sets_rejected():
    with pytest.raises(LeakageError):
        SplitPlan("unseen", "a", {"x"}, set(), {"x"})


def test_plan_round_trip(tmp_path, corpus):
    plan = build_split(corpus, "unseen", "gamma", seed=2)
    plan.save(tmp_path / "p.json")
    assert SplitPlan.load(tmp_path / "p.json") == plan


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**31), target=st.sampled_from(["alpha", "beta", "gamma"]))
def test_unseen_never_leaks(seed, target):
    corpus = small_corpus()
    plan = build_split(corpus, "unseen", target, seed=seed)
    assert not any(corpus.news[i].domain == target for i in plan.train | plan.val)
    assert not (plan.train & plan.val) and not (plan.train & plan.test)


def test_time_span(corpus):
    assert corpus.time_span() == (0.0, 303.0)


def test_synthetic_flag_survives(corpus):
    extra = EngagementRecord("user9", "alpha0", "gen", None, synthetic=True)
    c2 = corpus.with_engagements([extra])
    assert c2.without_synthetic() == corpus
    assert c2.user_engagements("user9", include_synthetic=False) == []
