"""The domain-aware user agent: engagement prediction and profile refinement."""
from __future__ import annotations

import enum
import hashlib
import json
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import prompts as P
from .data import Corpus, NewsItem
from .enrich import CommentingFeature, EnrichedNews
from .errors import DataError, UnparseableDecision
from .llm import ChatRequest, PromptKind, cached_complete

AGENT_SYSTEM = "You simulate a specific social media user."
UPDATE_SYSTEM = "You maintain the self-introduction of a simulated social media user."


class Decision(str, enum.Enum):
    REPOST = "Repost"
    IGNORE = "Ignore"


@dataclass(frozen=True)
class EngagementDecision:
    decision: Decision
    explanation: str


@dataclass(frozen=True)
class Evaluation:
    news_id: str
    predicted: Decision
    actual: Decision
    explanation: str


@dataclass(frozen=True)
class RefinementStep:
    iteration: int
    evaluated: tuple[Evaluation, ...]
    mispredictions: int
    updated_profile_text: str

    @property
    def accuracy(self) -> float:
        if not self.evaluated:
            return 1.0
        return sum(e.predicted == e.actual for e in self.evaluated) / len(self.evaluated)


@dataclass(frozen=True)
class UserProfile:
    user_id: str
    profile_text: str
    version: int = 0
    trace: tuple[RefinementStep, ...] = ()

    def __post_init__(self):
        if self.version < 0 or len(self.trace) != self.version:
            raise DataError(f"profile {self.user_id!r}: version {self.version} with {len(self.trace)} steps")

    def to_json(self) -> dict:
        return {
            "user_id": self.user_id,
            "version": self.version,
            "profile_text": self.profile_text,
            "trace": [
                {"iteration": s.iteration, "mispredictions": s.mispredictions,
                 "updated_profile_text": s.updated_profile_text,
                 "evaluated": [{"news_id": e.news_id, "predicted": e.predicted.value,
                                "actual": e.actual.value, "explanation": e.explanation}
                               for e in s.evaluated]}
                for s in self.trace
            ],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "UserProfile":
        trace = tuple(
            RefinementStep(
                s["iteration"],
                tuple(Evaluation(e["news_id"], Decision(e["predicted"]), Decision(e["actual"]), e["explanation"])
                      for e in s["evaluated"]),
                s["mispredictions"], s["updated_profile_text"])
            for s in doc["trace"])
        return cls(doc["user_id"], doc["profile_text"], doc["version"], trace)


@dataclass(frozen=True)
class AgentConfig:
    max_iters: int = 3
    batch: int = 5
    negatives_per_positive: int = 1
    neg_seed: int = 0
    # pseudo-negatives are drawn among this many unengaged items closest in time
    period_window: int = 10


# -- prompts -------------------------------------------------------------------

def domain_histogram(history: list[NewsItem]) -> list[str]:
    counts = Counter(n.domain for n in history)
    total = sum(counts.values())
    rows = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return [f"{dom}: {round(100 * c / total)}%" for dom, c in rows]


def build_init_prompt(history: list[NewsItem], style: CommentingFeature | None,
                      enriched: dict[str, EnrichedNews] | None = None) -> ChatRequest:
    lines = ["Engagement history by news domain:", *domain_histogram(history), ""]
    if style is not None and style.style_text:
        lines += [f"Commenting style: {style.style_text}", ""]
    if enriched:
        recent = [enriched[n.id].summary for n in history[-5:] if n.id in enriched]
        if recent:
            lines += ["Summaries of recently reposted news:",
                      *(f"{i}) {s}" for i, s in enumerate(recent, start=1)), ""]
    lines.append("Write a first-person self-introduction stating what type of user you are and the types "
                 "and characteristics of news you like or dislike engaging with.")
    return ChatRequest(PromptKind.PROFILE_INIT, P.PROFILE_INIT_SYSTEM,
                       "\n".join(lines) + P.output_suffix("profile"))


def build_engage_prompt(profile_text: str, news: NewsItem, enriched: EnrichedNews) -> ChatRequest:
    body = P.fill(P.ENGAGE_BODY, user_profile=profile_text, news_article=news.text,
                  news_features=enriched.features_text())
    return ChatRequest(PromptKind.ENGAGE_PREDICT, AGENT_SYSTEM, body + P.output_suffix("engagement"))


def build_update_prompt(profile_text: str, news: NewsItem, enriched: EnrichedNews, explanation: str,
                        actual: Decision) -> ChatRequest:
    if actual is Decision.REPOST:
        head, tail = P.UPDATE_MISSED_REPOST_BODY, P.UPDATE_REVISE_BODY
    else:
        head, tail = P.UPDATE_FALSE_REPOST_BODY, P.UPDATE_REVISE_IGNORED_BODY
    body = P.fill(head, user_profile=profile_text, news_article=news.text,
                  news_features=enriched.features_text(), user_explanation=explanation)
    return ChatRequest(PromptKind.PROFILE_UPDATE, UPDATE_SYSTEM,
                       body + "\n\n" + tail + P.output_suffix("profile"))


def parse_decision(text: str) -> EngagementDecision:
    fields = P.parse_block(text, "engagement")
    raw = fields["decision"].lower()
    repost, ignore = "repost" in raw, "ignore" in raw
    if repost == ignore:
        raise UnparseableDecision(f"decision {fields['decision']!r} is neither Repost nor Ignore")
    return EngagementDecision(Decision.REPOST if repost else Decision.IGNORE, fields["explanation"])


# -- operations ----------------------------------------------------------------

def initial_profile(user_id: str, history: list[NewsItem], style: CommentingFeature | None,
                    backend, cache=None, enriched: dict[str, EnrichedNews] | None = None) -> UserProfile:
    if not history:
        return UserProfile(user_id, P.GENERIC_PROFILE)
    resp = cached_complete(build_init_prompt(history, style, enriched), backend, cache)
    return UserProfile(user_id, P.parse_block(resp.text, "profile")["profile"])


def predict_engagement(profile: UserProfile | str, news: NewsItem, enriched: EnrichedNews,
                       backend, cache=None) -> EngagementDecision:
    if enriched.news_id != news.id:
        raise DataError(f"enrichment for {enriched.news_id!r} passed with news {news.id!r}")
    text = profile.profile_text if isinstance(profile, UserProfile) else profile
    resp = cached_complete(build_engage_prompt(text, news, enriched), backend, cache)
    return parse_decision(resp.text)


def _user_rng(seed: int, user_id: str) -> np.random.Generator:
    tag = int.from_bytes(hashlib.sha256(user_id.encode()).digest()[:8], "big")
    return np.random.default_rng([seed, tag])


def _ts(n: NewsItem) -> float:
    return n.timestamp if n.timestamp is not None else 0.0


def sample_pseudo_negatives(user_id: str, positives: list[NewsItem], engaged: set[str], corpus: Corpus,
                            cfg: AgentConfig, eligible: set[str] | None = None) -> list[NewsItem]:
    """Per positive, draw unengaged items from around the same time (seeded)."""
    pool = sorted((n for n in corpus.news.values()
                   if n.id not in engaged and (eligible is None or n.id in eligible)),
                  key=lambda n: (_ts(n), n.id))
    rng = _user_rng(cfg.neg_seed, user_id)
    chosen: list[NewsItem] = []
    taken: set[str] = set()
    for pos in positives:
        for _ in range(cfg.negatives_per_positive):
            free = [n for n in pool if n.id not in taken]
            if not free:
                return chosen
            free.sort(key=lambda n: (abs(_ts(n) - _ts(pos)), n.id))
            window = free[: cfg.period_window]
            pick = window[int(rng.integers(len(window)))]
            taken.add(pick.id)
            chosen.append(pick)
    return chosen


def refine_profile(user_id: str, history: list[NewsItem], corpus: Corpus, enriched: dict[str, EnrichedNews],
                   backend, cache=None, cfg: AgentConfig = AgentConfig(),
                   style: CommentingFeature | None = None, start: UserProfile | None = None,
                   persist_path: str | Path | None = None, eligible: set[str] | None = None) -> UserProfile:
    """Iteratively revise a profile until it reproduces the user's reposts.

    ``history`` holds the user's real reposts, oldest first. Each round
    predicts a fixed batch of the ``cfg.batch`` most recent reposts plus
    seeded pseudo-negatives, then feeds every misprediction, in time order,
    through the update prompt. Stops at a clean round or after
    ``cfg.max_iters`` rounds.
    """
    profile = start if start is not None else initial_profile(user_id, history, style, backend, cache, enriched)
    if not history or cfg.max_iters <= 0:
        return profile
    positives = history[-cfg.batch:] if cfg.batch > 0 else []
    engaged = {e.news_id for e in corpus.user_engagements(user_id)} | {n.id for n in history}
    negatives = sample_pseudo_negatives(user_id, positives, engaged, corpus, cfg, eligible)
    batch = sorted([(n, Decision.REPOST) for n in positives] + [(n, Decision.IGNORE) for n in negatives],
                   key=lambda p: (_ts(p[0]), p[0].id))
    missing = [n.id for n, _ in batch if n.id not in enriched]
    if missing:
        raise DataError(f"no enrichment for evaluated news {missing[:3]}")

    try:
        for iteration in range(profile.version + 1, cfg.max_iters + 1):
            evaluated = []
            for news, actual in batch:
                dec = predict_engagement(profile, news, enriched[news.id], backend, cache)
                evaluated.append(Evaluation(news.id, dec.decision, actual, dec.explanation))
            text = profile.profile_text
            wrong = [(ev, news) for ev, (news, _) in zip(evaluated, batch) if ev.predicted != ev.actual]
            for ev, news in wrong:
                resp = cached_complete(
                    build_update_prompt(text, news, enriched[news.id], ev.explanation, ev.actual), backend, cache)
                text = P.parse_block(resp.text, "profile")["profile"]
            step = RefinementStep(iteration, tuple(evaluated), len(wrong), text)
            profile = UserProfile(user_id, text, iteration, profile.trace + (step,))
            if not wrong:
                break
    except Exception:
        if persist_path is not None:
            Path(persist_path).write_text(json.dumps(profile.to_json(), sort_keys=True))
        raise
    return profile


# -- auxiliary engagement-prediction evaluation ----------------------------------------

@dataclass
class EngagementReport:
    precision: float
    recall: float
    accuracy: float
    micro_f1: float
    macro_f1: float

    def to_json(self) -> dict:
        return {"precision": self.precision, "recall": self.recall, "accuracy": self.accuracy,
                "micro_f1": self.micro_f1, "macro_f1": self.macro_f1}


def _f1(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if p + r > 0 else 0.0


def engagement_scores(actual: list[bool], predicted: list[bool]) -> EngagementReport:
    """Repost is the positive class; micro F1 pools both classes."""
    if len(actual) != len(predicted) or not actual:
        raise ValueError("need equal-length, non-empty label lists")
    tp = sum(a and p for a, p in zip(actual, predicted))
    fp = sum(p and not a for a, p in zip(actual, predicted))
    fn = sum(a and not p for a, p in zip(actual, predicted))
    tn = len(actual) - tp - fp - fn
    prec = tp / (tp + fp) if tp + fp else 0.0
    rec = tp / (tp + fn) if tp + fn else 0.0
    # Ignore as positive
    prec_n = tn / (tn + fn) if tn + fn else 0.0
    rec_n = tn / (tn + fp) if tn + fp else 0.0
    micro_p = (tp + tn) / len(actual)  # pooled over both classes, equals micro recall
    return EngagementReport(prec, rec, (tp + tn) / len(actual), _f1(micro_p, micro_p),
                            (_f1(prec, rec) + _f1(prec_n, rec_n)) / 2)


def engagement_prediction_report(profile: UserProfile | str, items: list[tuple[NewsItem, EnrichedNews, bool]],
                                 backend, cache=None) -> EngagementReport:
    predicted = [predict_engagement(profile, n, e, backend, cache).decision is Decision.REPOST
                 for n, e, _ in items]
    return engagement_scores([a for _, _, a in items], predicted)
