import pytest

from daud.agent import UserProfile
from daud.augment import AugmentationResult, assert_isolated, augment_engagements, select_candidates
from daud.data import EngagementRecord
from daud.embed import EmbeddingStore, HashingEncoder
from daud.enrich import CommentingFeature, EnrichedNews, NewsFeatures
from daud.errors import InvariantViolation, NoHistory
from daud.ldae import augment_corpus, build_profiles, commenting_styles, enrich_corpus
from daud.llm import MockBackend
from daud.synth import SyntheticSpec, generate_synthetic


@pytest.fixture(scope="module")
def world():
    return generate_synthetic(SyntheticSpec(news_per_domain=16, users=8, engage_prob=0.6, filler_tokens=20))


@pytest.fixture(scope="module")
def enriched(world):
    return enrich_corpus(world.corpus, MockBackend(world.rules))


def _feat(summary):
    return EnrichedNews("x", summary, NewsFeatures("d", "s", "t", "l", "c"))


def test_select_candidates_ranks_by_similarity(corpus):
    enriched = {nid: EnrichedNews(nid, n.text, NewsFeatures(n.domain, "s", "t", "l", "c"))
                for nid, n in corpus.news.items()}
    store = EmbeddingStore(HashingEncoder(64))
    cands = select_candidates("user0", corpus, enriched, 3, store)
    engaged = {e.news_id for e in corpus.user_engagements("user0")}
    assert len(cands) == 3 and not set(cands) & engaged
    assert select_candidates("user0", corpus, enriched, 0, store) == []
    assert select_candidates("user0", corpus, enriched, 50, store, eligible={"beta1"}) == ["beta1"] \
        or "beta1" in engaged


def test_select_candidates_needs_history(corpus):
    with pytest.raises(NoHistory):
        select_candidates("ghost", corpus, {}, 3, EmbeddingStore(HashingEncoder(8)))


def test_augment_follows_profile(world, enriched):
    backend = MockBackend(world.rules)
    c = world.corpus
    uid = "u0000"
    profile = UserProfile(uid, "I am a user. PREF:exaggerated")
    pool = sorted(n for n in c.news if n not in {e.news_id for e in c.user_engagements(uid)})[:10]
    res = augment_engagements(uid, profile, CommentingFeature.empty(uid), pool, c, enriched, backend)
    for nid in res.engaging:
        assert enriched[nid].features.sentiment == "exaggerated"
        assert res.comments[nid] == "so true everyone must see this"
    assert all(r.synthetic for r in res.records(c))
    assert AugmentationResult.from_json(res.to_json()) == res


def test_result_invariants():
    with pytest.raises(ValueError):
        AugmentationResult("u", ("a",), ("b",), {"b": "x"})


def test_isolation_guard():
    rec = EngagementRecord("u", "t1", "c", None, synthetic=True)
    with pytest.raises(InvariantViolation):
        assert_isolated([rec], {"t1"})
    assert_isolated([rec], {"t2"})


def test_corpus_passes_respect_eligibility(world, enriched):
    backend = MockBackend(world.rules)
    styles = commenting_styles(world.corpus, backend)
    profiles = build_profiles(world.corpus, enriched, styles, backend)
    assert set(profiles) == {e.user_id for e in world.corpus.engagements}
    politics = {n for n, item in world.corpus.news.items() if item.domain == "politics"}
    eligible = set(world.corpus.news) - politics
    _, records = augment_corpus(world.corpus, enriched, profiles, styles, EmbeddingStore(HashingEncoder(32)), 5,
                                backend, eligible=eligible, test_ids=politics)
    assert records and not {r.news_id for r in records} & politics
