"""Personalized engagement augmentation: candidate selection, prediction, comment generation."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field


from . import prompts as P
from .agent import Decision, UserProfile, predict_engagement
from .data import Corpus, EngagementRecord, NewsItem
from .embed import EmbeddingStore
from .enrich import CommentingFeature, EnrichedNews
from .errors import DaudError, NoHistory
from .llm import ChatRequest, PromptKind, cached_complete

log = logging.getLogger(__name__)

DEFAULT_T = 10


@dataclass(frozen=True)
class AugmentationResult:
    user_id: str
    candidates: tuple[str, ...]
    engaging: tuple[str, ...]
    comments: dict[str, str]
    failures: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not set(self.engaging) <= set(self.candidates) or set(self.comments) != set(self.engaging):
            raise ValueError(f"inconsistent augmentation result for {self.user_id!r}")

    def records(self, corpus: Corpus) -> list[EngagementRecord]:
        return [EngagementRecord(self.user_id, nid, self.comments[nid], corpus.news[nid].timestamp, synthetic=True)
                for nid in self.engaging]

    def to_json(self) -> dict:
        return {"user_id": self.user_id, "candidates": list(self.candidates), "engaging": list(self.engaging),
                "comments": dict(self.comments), "failures": dict(self.failures)}

    @classmethod
    def from_json(cls, doc: dict) -> "AugmentationResult":
        return cls(doc["user_id"], tuple(doc["candidates"]), tuple(doc["engaging"]), dict(doc["comments"]),
                   dict(doc.get("failures", {})))


def select_candidates(user_id: str, corpus: Corpus, enriched: dict[str, EnrichedNews], T: int,
                      store: EmbeddingStore, eligible: set[str] | None = None) -> list[str]:
    """Top-``T`` unengaged news by max summary cosine to the user's reposts."""
    if T <= 0:
        return []
    engaged = {e.news_id for e in corpus.user_engagements(user_id)}
    history = sorted(nid for nid in engaged if nid in enriched)
    if not history:
        raise NoHistory(f"user {user_id!r} has no enriched engagement history")
    pool = sorted(nid for nid in corpus.news
                  if nid not in engaged and nid in enriched and (eligible is None or nid in eligible))
    if not pool:
        return []
    hist = store.get_many([enriched[n].summary for n in history])
    cand = store.get_many([enriched[n].summary for n in pool])
    scores = (cand @ hist.T).max(axis=1)
    order = sorted(range(len(pool)), key=lambda i: (-scores[i], pool[i]))
    return [pool[i] for i in order[:T]]


def build_comment_prompt(profile: UserProfile, style: CommentingFeature, news: NewsItem,
                         enriched: EnrichedNews) -> ChatRequest:
    body = "\n\n".join([
        f"User self-introduction: {profile.profile_text}",
        f"Commenting features: {style.style_text or 'unknown'}\n{style.facets_text()}",
        f"News article: {news.text}\nNews summary: {enriched.summary}\nNews features: {enriched.features_text()}",
        P.COMMENT_GEN_INSTRUCTION,
    ])
    return ChatRequest(PromptKind.COMMENT_GEN, P.COMMENT_GEN_SYSTEM, body + P.output_suffix("comment"))


def augment_engagements(user_id: str, profile: UserProfile, style: CommentingFeature, candidates: list[str],
                        corpus: Corpus, enriched: dict[str, EnrichedNews], backend, cache=None) -> AugmentationResult:
    engaging: list[str] = []
    comments: dict[str, str] = {}
    failures: dict[str, str] = {}
    for nid in candidates:
        news = corpus.news[nid]
        try:
            dec = predict_engagement(profile, news, enriched[nid], backend, cache)
            if dec.decision is not Decision.REPOST:
                continue
            resp = cached_complete(build_comment_prompt(profile, style, news, enriched[nid]), backend, cache)
            comment = P.parse_block(resp.text, "comment")["comment"][:280]
        except (DaudError, KeyError) as exc:
            log.warning("augmentation of %s for user %s failed: %s", nid, user_id, exc)
            failures[nid] = f"{type(exc).__name__}: {exc}"
            continue
        engaging.append(nid)
        comments[nid] = comment
    return AugmentationResult(user_id, tuple(candidates), tuple(engaging), comments, failures)


def assert_isolated(records: list[EngagementRecord], test_ids: set[str] | frozenset[str]) -> None:
    """No synthetic engagement may land on a test item."""
    from .errors import InvariantViolation

    bad = [r for r in records if r.synthetic and r.news_id in test_ids]
    if bad:
        raise InvariantViolation(f"{len(bad)} synthetic engagement(s) on test items, e.g. {bad[0].news_id!r}")
