"""Corpus-wide LDAE passes: enrichment, commenting styles, profiles, augmentation.

Every pass is label-free. Profiles and styles come from the real
engagement log only; augmentation is restricted to an ``eligible`` news
set so synthetic records never land on held-out items.
"""
from __future__ import annotations

import logging
from collections.abc import Iterable

from .agent import AgentConfig, UserProfile, refine_profile
from .augment import AugmentationResult, assert_isolated, augment_engagements, select_candidates
from .data import Corpus, EngagementRecord
from .embed import EmbeddingStore
from .enrich import CommentingFeature, EnrichedNews, enrich_news, extract_commenting_style
from .errors import NoComments

log = logging.getLogger(__name__)


def enrich_corpus(corpus: Corpus, backend, cache=None) -> dict[str, EnrichedNews]:
    return {nid: enrich_news(corpus.news[nid], backend, cache) for nid in sorted(corpus.news)}


def _real_users(corpus: Corpus) -> list[str]:
    return sorted({e.user_id for e in corpus.engagements if not e.synthetic})


def commenting_styles(corpus: Corpus, backend, cache=None) -> dict[str, CommentingFeature]:
    out = {}
    for uid in _real_users(corpus):
        comments = [e.comment for e in corpus.user_engagements(uid, include_synthetic=False)]
        try:
            out[uid] = extract_commenting_style(uid, comments, backend, cache)
        except NoComments:
            out[uid] = CommentingFeature.empty(uid)
    return out


def build_profiles(corpus: Corpus, enriched: dict[str, EnrichedNews], styles: dict[str, CommentingFeature],
                   backend, cache=None, cfg: AgentConfig = AgentConfig()) -> dict[str, UserProfile]:
    out = {}
    for uid in _real_users(corpus):
        history = [corpus.news[e.news_id] for e in corpus.user_engagements(uid, include_synthetic=False)]
        out[uid] = refine_profile(uid, history, corpus, enriched, backend, cache, cfg, styles.get(uid))
    return out


def augment_corpus(corpus: Corpus, enriched: dict[str, EnrichedNews], profiles: dict[str, UserProfile],
                   styles: dict[str, CommentingFeature], store: EmbeddingStore, T: int, backend, cache=None,
                   eligible: Iterable[str] | None = None,
                   test_ids: Iterable[str] = ()) -> tuple[list[AugmentationResult], list[EngagementRecord]]:
    """Augment every profiled user; returns per-user results and the synthetic records."""
    allowed = set(eligible) if eligible is not None else None
    results, records = [], []
    for uid in sorted(profiles):
        cands = select_candidates(uid, corpus, enriched, T, store, allowed)
        style = styles.get(uid) or CommentingFeature.empty(uid)
        res = augment_engagements(uid, profiles[uid], style, cands, corpus, enriched, backend, cache)
        results.append(res)
        records += res.records(corpus)
    assert_isolated(records, frozenset(test_ids))
    return results, records
