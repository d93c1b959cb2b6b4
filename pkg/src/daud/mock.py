"""Deterministic stand-in for the LLM.

A rule table holds one rule per prompt kind. Rules read the fields they need
out of the rendered prompt via the fixed section markers of the prompt
bodies, then answer with a well-formed structured block. A rule may also be
``{"canned": text}``, returned verbatim. Nothing here reads a clock, a random
source or the filesystem.
"""
from __future__ import annotations

import json
import re
from pathlib import Path

from . import prompts as P
from .errors import NoRuleForKind
from .llm import ChatRequest, PromptKind

FEATURE_KEYS = tuple(k for k, _, _ in P.FEATURE_MARKERS)
FACET_KEYS = ("tone", "intent", "linguistic_style", "stance_consistency", "targeting_pattern")
_TAG_TO_KEY = {tag: key for key, _, tag in P.FEATURE_MARKERS}

DEFAULT_SUMMARY = (
    "This article belongs to the {news_domain} domain and carries {sentiment} sentiment. "
    "Its structure is {structural}; its logic is {logical_consistency}; "
    "its sources are {source_credibility}."
)
DEFAULT_STYLE = "The user writes with a {tone} tone, mainly to {intent}, in a {linguistic_style} style."
DEFAULT_INIT = "I am a Twitter (X) user. My engagement history by news domain: {histogram}."


class MockRuleTable:
    def __init__(self, rules: dict | None = None):
        rules = dict(rules or {})
        for kind in rules:
            PromptKind(kind)
        self.rules = {PromptKind(k).value: v for k, v in rules.items()}

    def rule(self, kind: PromptKind) -> dict:
        try:
            return self.rules[PromptKind(kind).value]
        except KeyError:
            raise NoRuleForKind(f"mock rule table has no rule for {PromptKind(kind).value}") from None

    def to_json(self) -> dict:
        return json.loads(json.dumps(self.rules, sort_keys=True))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), sort_keys=True, indent=1))

    @classmethod
    def load(cls, path: str | Path) -> "MockRuleTable":
        return cls(json.loads(Path(path).read_text()))


def default_rules() -> MockRuleTable:
    """A generic table that answers every prompt kind with schema-valid output."""
    return MockRuleTable({
        "NFE": {"features": {}},
        "EngagePredict": {"default": "Ignore"},
        "ProfileUpdate": {},
        "ProfileInit": {},
        "CommentStyle": {"facets": {}},
        "CommentGen": {"rules": [], "default": "Interesting read."},
    })


# -- prompt section extraction -------------------------------------------------

def _between(text: str, start: str, end: str) -> str | None:
    i = text.find(start)
    if i < 0:
        return None
    i += len(start)
    j = text.find(end, i)
    if j < 0:
        return None
    return text[i:j]


def _tokens(text: str) -> set[str]:
    return {t for t in re.split(r"[^\w-]+", text.lower()) if t}


def _feature_markers(text: str) -> dict[str, str]:
    return {_TAG_TO_KEY[tag]: val for tag, val in re.findall(r"\[([A-Z-]+):([a-z0-9-]+)\]", text)
            if tag in _TAG_TO_KEY}


def _profile_tags(profile: str) -> tuple[list[str], list[str]]:
    prefs = re.findall(r"\bPREF:([a-z0-9-]+)", profile)
    dislikes = re.findall(r"\bDISLIKE:([a-z0-9-]+)", profile)
    return list(dict.fromkeys(prefs)), list(dict.fromkeys(dislikes))


def _classify(tokens: set[str], spec: dict) -> str:
    for value, keywords in spec.get("values", []):
        if any(k.lower() in tokens for k in keywords):
            return value
    return spec.get("default", "unremarkable")


def _profile_text(prefs: list[str], dislikes: list[str]) -> str:
    parts = ["I am a domain-aware Twitter (X) user."]
    if prefs:
        parts.append("I repost news showing: " + ", ".join(prefs) + ".")
        parts.append(" ".join(f"PREF:{p}" for p in prefs))
    if dislikes:
        parts.append("I now dislike news showing: " + ", ".join(dislikes) + ".")
        parts.append(" ".join(f"DISLIKE:{d}" for d in dislikes))
    return " ".join(parts)


# -- per-kind rules ------------------------------------------------------------

def _nfe(req: ChatRequest, rule: dict) -> str:
    article = _between(req.user_text, "its article content is: ", ".\n\nYour task is to analyze")
    if article is None:
        return rule.get("fallback", "I could not find the article.")
    tokens = _tokens(article)
    specs = rule.get("features", {})
    feats = {k: _classify(tokens, specs.get(k, {})) for k in FEATURE_KEYS}
    summary = rule.get("summary", DEFAULT_SUMMARY).format(**feats)
    if not rule.get("emit_block", True):
        return f"Here is my analysis. {summary}"
    values = {"Summary": summary}
    for key, label, _ in P.FEATURE_MARKERS:
        values[label] = feats[key]
    return "Analysis follows.\n" + P.render_block("nfe", values)


def _engage(req: ChatRequest, rule: dict) -> str:
    default = rule.get("default", "Ignore")
    profile = _between(req.user_text, "dislike engaging with: ", ". You are now evaluating whether to repost")
    features = _between(req.user_text, "Its news features are: ", ".\n\nFollow these steps")
    markers = _feature_markers(features or "")
    if profile is None or not markers:
        return P.render_block("engagement", {
            "Decision": default, "Explanation": "The profile or the news features could not be read."})
    prefs, dislikes = _profile_tags(profile)
    values = set(markers.values())
    hit = [p for p in prefs if p in values]
    blocked = [d for d in dislikes if d in values]
    if rule.get("mode", "all") == "any":
        liked = bool(hit)
    else:
        liked = bool(prefs) and len(hit) == len(prefs)
    if liked and not blocked:
        decision = "Repost"
        why = f"The news shows {', '.join(hit)}, which matches my stated preferences."
    else:
        decision = "Ignore"
        if blocked:
            why = f"The news shows {', '.join(blocked)}, which I dislike."
        elif prefs:
            missing = [p for p in prefs if p not in values]
            why = f"The news lacks {', '.join(missing)}, which I look for."
        else:
            why = "My self-introduction names no preference this news satisfies."
    return P.render_block("engagement", {"Decision": decision, "Explanation": why})


def _profile_update(req: ChatRequest, rule: dict) -> str:
    text = req.user_text
    profile = _between(text, "dislike engaging with: ", ". Recently, you predicted")
    features = _between(text, "Its news features are: ", "; Your explanation was:")
    markers = _feature_markers(features or "")
    if profile is None or not markers:
        return P.render_block("profile", {"Profile": rule.get("default", P.GENERIC_PROFILE)})
    prefs, dislikes = _profile_tags(profile)
    values = [markers[k] for k in FEATURE_KEYS if k in markers]
    if "the user actually ignored" in text:
        dislikes += [v for v in values if v not in prefs and v not in dislikes]
    else:
        kept = [p for p in prefs if p in values]
        prefs = kept if kept else list(dict.fromkeys(values))
        dislikes = [d for d in dislikes if d not in values]
    return P.render_block("profile", {"Profile": _profile_text(prefs, dislikes)})


def _profile_init(req: ChatRequest, rule: dict) -> str:
    hist = _between(req.user_text, "Engagement history by news domain:\n", "\n\n") or "none"
    histogram = "; ".join(line.strip() for line in hist.splitlines() if line.strip())
    return P.render_block("profile", {"Profile": rule.get("template", DEFAULT_INIT).format(histogram=histogram)})


def _comment_style(req: ChatRequest, rule: dict) -> str:
    comments = _between(req.user_text, "the comments are listed as follows: ", ". Your task is to analyze")
    tokens = _tokens(comments or "")
    specs = rule.get("facets", {})
    facets = {k: _classify(tokens, specs.get(k, {})) for k in FACET_KEYS}
    style = rule.get("style", DEFAULT_STYLE).format(**facets)
    return P.render_block("style", {
        "Style": style, "Tone": facets["tone"], "Intent": facets["intent"],
        "Linguistic Style": facets["linguistic_style"],
        "Stance Consistency": facets["stance_consistency"],
        "Targeting Pattern": facets["targeting_pattern"],
    })


def _comment_gen(req: ChatRequest, rule: dict) -> str:
    comment = rule.get("default", "Interesting read.")
    for markers, text in rule.get("rules", []):
        if all(m in req.user_text for m in markers):
            comment = text
            break
    return P.render_block("comment", {"Comment": comment})


_HANDLERS = {
    PromptKind.NFE: _nfe,
    PromptKind.ENGAGE_PREDICT: _engage,
    PromptKind.PROFILE_UPDATE: _profile_update,
    PromptKind.PROFILE_INIT: _profile_init,
    PromptKind.COMMENT_STYLE: _comment_style,
    PromptKind.COMMENT_GEN: _comment_gen,
}


def mock_response(req: ChatRequest, rules: MockRuleTable) -> str:
    rule = rules.rule(req.prompt_kind)
    if "canned" in rule:
        return rule["canned"]
    return _HANDLERS[req.prompt_kind](req, rule)
