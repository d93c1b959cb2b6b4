"""Prompt bodies and the structured-output contract shared by all LLM calls.

The fixed prompt bodies are pinned character-for-character by golden-file
tests. Slots are filled in a single regex pass, so braces or placeholder
text inside user content are never interpreted.
"""
from __future__ import annotations

import re

NEWS_ARTICLE = "{news article}"
NEWS_FEATURES = "{news features}"
USER_PROFILE = "{user profile}"
USER_EXPLANATION = "{user explanation}"
COMMENTS_LIST = "{comments list}"

NFE_BODY = (
    "Recently, the user browsed a news article, its article content is: {news article}.\n\n"
    "Your task is to analyze the content of the news text and then summarize the characteristics "
    "of true and fake information within the news.\n\n"
    "Follow these steps:\n\n"
    "(1) Identify and ignore website noise, such as ads, image captions, or unrelated links.\n\n"
    "(2) Analyze the news text based on: News Domain, Sentiment (e.g., neutral, emotional, exaggerated), "
    "Structural Features, Logical Consistency, Source Credibility (Check sources of quotes and be suspicious)."
)

COMMENT_STYLE_BODY = (
    "Recently, the user has posted multiple comments on different news articles, the comments are "
    "listed as follows: {comments list}. Your task is to analyze these comments and summarize the "
    "user’s typical tone and commenting style.\n\n"
    "Follow these steps:\n\n"
    "(1) Identify and ignore parts of the comments that are formulaic (e.g., hashtags, URLs, emojis, "
    "or repost tags) unless they contribute meaningfully to the tone.\n\n"
    "(2) Analyze the comments based on: Tone (e.g., sarcastic, sincere, angry, humorous, accusatory, "
    "supportive); Intent (e.g., inform, provoke, agree, debunk, mock); Linguistic Style (e.g., formal, "
    "casual, concise, emotionally charged, rhetorical); Stance Consistency (e.g., does the user "
    "consistently take a certain side or shift based on domain or content); Targeting Pattern (e.g., "
    "does the user address individuals, institutions, abstract ideas, or the public)."
)

ENGAGE_BODY = (
    "You are simulating the behavior of a Twitter (X) user, who is either a regular user, a debunking "
    "user, or a malicious user (e.g., spammer or troll).\n\n"
    "Here is your self-introduction about what type of user you are as well as the types and "
    "characteristics of news you like or dislike engaging with: {user profile}. You are now evaluating "
    "whether to repost the following news article based on this user’s perspective: {news article}; "
    "Its news features are: {news features}.\n\n"
    "Follow these steps:\n\n"
    "(1) Review your self-introduction to identify the user type, news types you prefer and dislike;\n\n"
    "(2) Analyze the features of the news article (e.g., News Domain; Sentiment; Structural Features; "
    "Logical Consistency; and Source Credibility);\n\n"
    "(3) Assess whether these features align or conflict with your preferences;\n\n"
    "(4) Decide whether to Repost or Ignore the news. Provide a detailed explanation that connects your "
    "decision to your self-introduction and the news features."
)

UPDATE_MISSED_REPOST_BODY = (
    "Here is your current self-introduction describing your user type and the types and characteristics "
    "of news you like or dislike engaging with: {user profile}. Recently, you predicted that this user "
    "would ignore the following news article: {news article}; Its news features are: {news features}; "
    "Your explanation was: {user explanation}.\n\n"
    "However, the user actually reposted the news article."
)

UPDATE_REVISE_BODY = (
    "This indicates that your self-introduction may be inaccurate, incomplete, or missing a key "
    "motivational factor that caused this action. Your task is to revise your self-introduction so that "
    "it can explain the reposting behavior naturally and accurately. Follow these steps:\n\n"
    "(1) Identify what you overlooked or misunderstood about the news article that led to the repost;\n\n"
    "(2) Analyze what features of the article (i.e., news domain; sentiment; structural features; "
    "logical consistency; and source credibility) may motivate the user to repost it;\n\n"
    "(3) Consider how your user type or value system may need to be updated to reflect this motivation.\n\n"
    "(4) Decide which past preferences should be retained, revised, or discarded to avoid future "
    "contradiction;\n\n"
    "(5) Write an updated self-introduction that: Starts with your new user type; Describes your "
    "newfound preferences reflected in this interaction; Summarizes any relevant retained preferences; "
    "Describes what types of news you now dislike."
)

# Mirror images for "predicted Repost, actually ignored".
UPDATE_FALSE_REPOST_BODY = (
    UPDATE_MISSED_REPOST_BODY
    .replace("would ignore the following", "would repost the following")
    .replace("the user actually reposted the news article", "the user actually ignored the news article")
)
UPDATE_REVISE_IGNORED_BODY = UPDATE_REVISE_BODY.replace(
    "may motivate the user to repost it;",
    "may have made the article unattractive to the user;",
)

COMMENT_GEN_SYSTEM = "You write a short social-media comment in this user's voice"
COMMENT_GEN_INSTRUCTION = (
    "Write one comment (≤ 280 characters) consistent with the Tone, Intent, and Linguistic Style above."
)

PROFILE_INIT_SYSTEM = "You write first-person self-introductions of social media users."
GENERIC_PROFILE = (
    "I am a regular Twitter (X) user with no recorded engagement history. "
    "I have no established news preferences yet."
)

# Structured output -----------------------------------------------------------

SCHEMA_FIELDS: dict[str, tuple[str, ...]] = {
    "nfe": ("Summary", "News Domain", "Sentiment", "Structural Features", "Logical Consistency",
            "Source Credibility"),
    "engagement": ("Decision", "Explanation"),
    "profile": ("Profile",),
    "style": ("Style", "Tone", "Intent", "Linguistic Style", "Stance Consistency", "Targeting Pattern"),
    "comment": ("Comment",),
}


def output_suffix(schema_id: str) -> str:
    fields = SCHEMA_FIELDS[schema_id]
    lines = "\n".join(f"{name}: <{name.lower()}>" for name in fields)
    return (
        "\n\n---\n"
        f"Answer with exactly one fenced block tagged `{schema_id}`, one field per line, "
        "using these field labels:\n"
        f"```{schema_id}\n{lines}\n```"
    )


def render_block(schema_id: str, values: dict[str, str]) -> str:
    body = "\n".join(f"{name}: {values[name]}" for name in SCHEMA_FIELDS[schema_id])
    return f"```{schema_id}\n{body}\n```"


def fill(body: str, **slots: str) -> str:
    mapping = {
        "news_article": NEWS_ARTICLE,
        "news_features": NEWS_FEATURES,
        "user_profile": USER_PROFILE,
        "user_explanation": USER_EXPLANATION,
        "comments_list": COMMENTS_LIST,
    }
    # single pass so that slot values containing other placeholders stay literal
    pattern = re.compile("|".join(re.escape(mapping[k]) for k in slots))
    lookup = {mapping[k]: v for k, v in slots.items()}
    return pattern.sub(lambda m: lookup[m.group(0)], body)


def slug(value: str) -> str:
    return re.sub(r"[^a-z0-9]+", "-", value.lower()).strip("-") or "none"


FEATURE_MARKERS = (
    ("news_domain", "News Domain", "NEWS-DOMAIN"),
    ("sentiment", "Sentiment", "SENTIMENT"),
    ("structural", "Structural Features", "STRUCTURE"),
    ("logical_consistency", "Logical Consistency", "LOGIC"),
    ("source_credibility", "Source Credibility", "SOURCE"),
)


def render_features(summary: str, features: dict[str, str]) -> str:
    """The ``{news features}`` slot: summary plus each dimension with a marker tag."""
    parts = [f"Summary: {summary}"]
    for key, label, tag in FEATURE_MARKERS:
        value = features[key]
        parts.append(f"{label}: {value} [{tag}:{slug(value)}]")
    return "; ".join(parts)


SCHEMA_KEYS: dict[str, dict[str, str]] = {
    "nfe": {"Summary": "summary", "News Domain": "news_domain", "Sentiment": "sentiment",
            "Structural Features": "structural", "Logical Consistency": "logical_consistency",
            "Source Credibility": "source_credibility"},
    "engagement": {"Decision": "decision", "Explanation": "explanation"},
    "profile": {"Profile": "profile"},
    "style": {"Style": "style_text", "Tone": "tone", "Intent": "intent",
              "Linguistic Style": "linguistic_style", "Stance Consistency": "stance_consistency",
              "Targeting Pattern": "targeting_pattern"},
    "comment": {"Comment": "comment"},
}


def parse_block(text: str, schema_id: str) -> dict[str, str]:
    """Pull the fenced ``schema_id`` block out of a completion and map its fields.

    Prose around the block is ignored. Lines that do not open a known field
    continue the previous one.
    """
    from .errors import MissingBlock, MissingOutputField

    match = re.search(r"```[ \t]*" + re.escape(schema_id) + r"[ \t]*\r?\n(.*?)```", text, re.DOTALL)
    if match is None:
        raise MissingBlock(f"no ```{schema_id} block in completion")
    keys = SCHEMA_KEYS[schema_id]
    by_lower = {label.lower(): key for label, key in keys.items()}
    values: dict[str, list[str]] = {}
    current = None
    for line in match.group(1).splitlines():
        head, sep, rest = line.partition(":")
        key = by_lower.get(head.strip().lower()) if sep else None
        if key is not None:
            current = key
            values[current] = [rest.strip()]
        elif current is not None and line.strip():
            values[current].append(line.strip())
    out = {}
    for key in keys.values():
        value = " ".join(values.get(key, [])).strip()
        if not value:
            raise MissingOutputField(key)
        out[key] = value
    return out
