"""News feature enrichment and commenting-style extraction."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

from . import prompts as P
from .data import NewsItem
from .errors import EmptyArticle, NoComments
from .llm import ChatRequest, PromptKind, cached_complete

MAX_STYLE_COMMENTS = 20
NFE_SYSTEM = "You are a careful fact-checking analyst."
STYLE_SYSTEM = "You analyze the commenting behavior of social media users."


@dataclass(frozen=True)
class NewsFeatures:
    news_domain: str
    sentiment: str
    structural: str
    logical_consistency: str
    source_credibility: str


@dataclass(frozen=True)
class EnrichedNews:
    news_id: str
    summary: str
    features: NewsFeatures

    def __post_init__(self):
        if not self.summary or not all(asdict(self.features).values()):
            raise ValueError(f"enriched news {self.news_id!r} has empty fields")

    def features_text(self) -> str:
        return P.render_features(self.summary, asdict(self.features))

    def to_json(self) -> dict:
        return {"news_id": self.news_id, "summary": self.summary, "features": asdict(self.features)}

    @classmethod
    def from_json(cls, doc: dict) -> "EnrichedNews":
        return cls(doc["news_id"], doc["summary"], NewsFeatures(**doc["features"]))


@dataclass(frozen=True)
class StyleFacets:
    tone: str = ""
    intent: str = ""
    linguistic_style: str = ""
    stance_consistency: str = ""
    targeting_pattern: str = ""


@dataclass(frozen=True)
class CommentingFeature:
    user_id: str
    style_text: str
    facets: StyleFacets

    @classmethod
    def empty(cls, user_id: str) -> "CommentingFeature":
        return cls(user_id, "", StyleFacets())

    def facets_text(self) -> str:
        f = self.facets
        return (f"Tone: {f.tone}; Intent: {f.intent}; Linguistic Style: {f.linguistic_style}; "
                f"Stance Consistency: {f.stance_consistency}; Targeting Pattern: {f.targeting_pattern}")

    def to_json(self) -> dict:
        return {"user_id": self.user_id, "style_text": self.style_text, "facets": asdict(self.facets)}

    @classmethod
    def from_json(cls, doc: dict) -> "CommentingFeature":
        return cls(doc["user_id"], doc["style_text"], StyleFacets(**doc["facets"]))


def build_nfe_prompt(news: NewsItem) -> ChatRequest:
    if not news.text or not news.text.strip():
        raise EmptyArticle(f"news {news.id!r} has no article text")
    body = P.fill(P.NFE_BODY, news_article=news.text)
    return ChatRequest(PromptKind.NFE, NFE_SYSTEM, body + P.output_suffix("nfe"))


def parse_nfe_output(text: str) -> tuple[str, NewsFeatures]:
    fields = P.parse_block(text, "nfe")
    summary = fields.pop("summary")
    return summary, NewsFeatures(**fields)


def enrich_news(news: NewsItem, backend, cache=None) -> EnrichedNews:
    resp = cached_complete(build_nfe_prompt(news), backend, cache)
    summary, features = parse_nfe_output(resp.text)
    return EnrichedNews(news.id, summary, features)


def format_comments(comments: list[str]) -> str:
    return "; ".join(f"{i}) {c}" for i, c in enumerate(comments, start=1))


def build_style_prompt(comments: list[str]) -> ChatRequest:
    body = P.fill(P.COMMENT_STYLE_BODY, comments_list=format_comments(comments))
    return ChatRequest(PromptKind.COMMENT_STYLE, STYLE_SYSTEM, body + P.output_suffix("style"))


def extract_commenting_style(user_id: str, comments: list[str], backend, cache=None) -> CommentingFeature:
    """Comments are expected oldest first; only the latest 20 non-empty ones are sent."""
    kept = [c for c in comments if c and c.strip()][-MAX_STYLE_COMMENTS:]
    if not kept:
        raise NoComments(f"user {user_id!r} has no non-empty comments")
    resp = cached_complete(build_style_prompt(kept), backend, cache)
    fields = P.parse_block(resp.text, "style")
    style_text = fields.pop("style_text")
    return CommentingFeature(user_id, style_text, StyleFacets(**fields))


def save_jsonl(records, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            doc = rec.to_json() if hasattr(rec, "to_json") else rec
            fh.write(json.dumps(doc, ensure_ascii=False, sort_keys=True) + "\n")


def load_jsonl(path: str | Path, cls=None) -> list:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                doc = json.loads(line)
                out.append(cls.from_json(doc) if cls is not None else doc)
    return out
