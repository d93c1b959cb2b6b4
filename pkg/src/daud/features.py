"""Turn a corpus plus its enrichment artifacts into model-ready bundles."""
from __future__ import annotations

from collections.abc import Iterable, Mapping

from .agent import UserProfile
from .data import Corpus
from .dsra import NewsBundle, UserBundle
from .embed import EmbeddingStore
from .enrich import EnrichedNews
from .prompts import GENERIC_PROFILE

REPOST_MARKER = "REPOST"


def engagement_text(summary_or_text: str) -> str:
    return f"{summary_or_text} {REPOST_MARKER}"


def build_bundles(corpus: Corpus, news_ids: Iterable[str], store: EmbeddingStore,
                  enriched: Mapping[str, EnrichedNews] | None = None,
                  profiles: Mapping[str, UserProfile] | None = None,
                  domain_index: Mapping[str, int] | None = None,
                  m_cap: int = 32, k_cap: int = 32, use_llm: bool = True) -> list[NewsBundle]:
    """One bundle per news id, in the order given.

    A user's engagement sequence is their history up to and including the
    engagement on this news, most recent first, so position 0 is always
    the current engagement. ``use_llm=False`` is the ablation without enrichment: raw text stands in
    for summaries, every user gets the generic profile and synthetic
    engagements are dropped.
    """
    enriched = enriched or {}
    profiles = profiles or {}
    domain_index = domain_index or {d: i for i, d in enumerate(sorted(corpus.domains))}
    source = corpus if use_llm else corpus.without_synthetic()
    by_news = source.news_engagements()
    texts: list[str] = []

    def summary(nid: str) -> str:
        if use_llm and nid in enriched:
            return enriched[nid].summary
        return corpus.news[nid].text

    plan = []
    for nid in news_ids:
        item = corpus.news[nid]
        users = []
        seen: set[str] = set()
        for e in by_news[nid]:
            if e.user_id in seen:
                continue
            seen.add(e.user_id)
            if len(users) == m_cap:
                break
            prof = profiles.get(e.user_id) if use_llm else None
            p_text = prof.profile_text if prof is not None else GENERIC_PROFILE
            seq = source.user_engagements(e.user_id)
            upto = next(i for i, h in enumerate(seq) if h.key == e.key)
            hist = seq[max(0, upto + 1 - k_cap):upto + 1][::-1]
            engs = [(engagement_text(summary(h.news_id)), h.comment) for h in hist]
            doms = [domain_index[corpus.news[h.news_id].domain] for h in hist]
            users.append((p_text, engs, doms))
            texts.append(p_text)
            for et, ct in engs:
                texts += [et, ct]
        texts += [item.text, summary(nid)]
        plan.append((item, summary(nid), users))

    store.get_many(texts)  # one batched encoder call
    bundles = []
    for item, summ, users in plan:
        ubs = [UserBundle(store.get(p_text), [(store.get(et), store.get(ct)) for et, ct in engs], doms)
               for p_text, engs, doms in users]
        bundles.append(NewsBundle(store.get(item.text), store.get(summ), ubs, domain_index[item.domain],
                                  float(item.label), item.id))
    return bundles
