"""Planted-signal synthetic corpora and the matching mock rule table.

Every fake item carries one cue token shared by all domains; each domain
has its own exclusive style vocabulary. Veracity also leaks, noisily,
through feature words the mock LLM reads (sensational wording, anonymous
sourcing, contradictions). Simulated users follow rules stated in that
feature vocabulary, so the mock agent can learn them.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .config import BackendConfig, EmbedderConfig, Paths, PipelineConfig, save_config
from .data import Corpus, EngagementRecord, NewsItem, VeracityLabel, save_corpus
from .detector import TrainConfig
from .dsra import ModelConfig
from .mock import MockRuleTable

CUE_TOKEN = "allegedly-leaked"
DOMAIN_NAMES = ("politics", "entertainment", "health", "science", "sports", "business")

# feature word groups: (feature, value, tokens); each shows up with
# probability feature_rate_fake in fake items and feature_rate_true in true ones
FEATURE_WORDS = (
    ("sentiment", "exaggerated", ("shocking", "outrageous", "unbelievable")),
    ("structural", "fragmented", ("breaking", "must-read", "viral")),
    ("logical_consistency", "contradictory", ("impossible", "contradicts", "somehow")),
    ("source_credibility", "unverified", ("anonymous", "insiders", "rumor")),
)
FEATURE_DEFAULTS = {"sentiment": "neutral", "structural": "conventional",
                     "logical_consistency": "consistent", "source_credibility": "attributed"}

# user archetypes: rule (feature, value) and comment stance by news label
# Each camp reacts differently to fake and true items in its own words.
ARCHETYPES = {
    "spreader": {"rule": ("sentiment", "exaggerated"), "fake": "so true everyone must see this",
                 "true": "ok whatever"},
    "debunker": {"rule": ("source_credibility", "unverified"), "fake": "fake news do not believe this",
                 "true": "checked the sources looks solid"},
    "follower": {"rule": ("structural", "fragmented"), "fake": "wow cannot believe this",
                 "true": "thanks for the update"},
    "skeptic": {"rule": ("logical_consistency", "contradictory"), "fake": "this makes no sense at all",
                "true": "seems reasonable enough"},
}
STYLE_FACETS = {
    "tone": (("supportive", ("true", "thanks")), ("accusatory", ("fake",)), ("doubtful", ("sense", "seems"))),
    "intent": (("amplify", ("everyone",)), ("debunk", ("sources", "fake")), ("inform", ("update",))),
    "linguistic_style": (("emphatic", ("must", "wow")), ("casual", ("ok", "whatever"))),
    "stance_consistency": (("consistent", ("this", "the")),),
    "targeting_pattern": (("the public", ("everyone",)), ("the outlet", ("news", "sources"))),
}


@dataclass
class SyntheticSpec:
    n_domains: int = 3
    news_per_domain: int = 100
    users: int = 40
    common_fraction: float = 0.6
    fake_fraction: float = 0.5
    filler_tokens: int = 150
    style_tokens: int = 12
    vocab_per_domain: int = 40
    filler_vocab: int = 400
    feature_rate_fake: float = 0.6
    feature_rate_true: float = 0.15
    engage_prob: float = 0.8
    seed: int = 0

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def load(cls, path: str | Path) -> "SyntheticSpec":
        return cls(**json.loads(Path(path).read_text()))


@dataclass
class SyntheticWorld:
    corpus: Corpus
    rules: MockRuleTable
    user_rules: dict[str, tuple[str, str]] = field(default_factory=dict)
    user_types: dict[str, str] = field(default_factory=dict)


def domain_vocab(domain: str, n: int) -> list[str]:
    return [f"{domain}-{k:02d}" for k in range(n)]


def mock_rules(domains: list[str], vocab_per_domain: int) -> MockRuleTable:
    nfe_features = {"news_domain": {"default": "general",
                                    "values": [[d, domain_vocab(d, vocab_per_domain)] for d in domains]}}
    for feat, value, tokens in FEATURE_WORDS:
        nfe_features[feat] = {"default": FEATURE_DEFAULTS[feat], "values": [[value, list(tokens)]]}
    facets = {k: {"default": "neutral", "values": [[v, list(toks)] for v, toks in opts]}
              for k, opts in STYLE_FACETS.items()}
    # a generated comment follows the camp's usual reaction to the news it likes
    gen_rules = [[[f"PREF:{arch['rule'][1]}"], arch["fake"]] for arch in ARCHETYPES.values()]
    return MockRuleTable({
        "NFE": {"features": nfe_features},
        "EngagePredict": {"default": "Ignore", "mode": "all"},
        "ProfileUpdate": {},
        "ProfileInit": {},
        "CommentStyle": {"facets": facets},
        "CommentGen": {"rules": gen_rules, "default": "interesting read"},
    })


def _features_of(tokens: set[str]) -> dict[str, str]:
    out = dict(FEATURE_DEFAULTS)
    for feat, value, words in FEATURE_WORDS:
        if tokens & set(words):
            out[feat] = value
    return out


def generate_synthetic(spec: SyntheticSpec = SyntheticSpec()) -> SyntheticWorld:
    if spec.n_domains > len(DOMAIN_NAMES):
        raise ValueError(f"at most {len(DOMAIN_NAMES)} synthetic domains")
    rng = np.random.default_rng(spec.seed)
    domains = list(DOMAIN_NAMES[: spec.n_domains])
    filler = [f"w{k:03d}" for k in range(spec.filler_vocab)]
    news: list[NewsItem] = []
    feats: dict[str, dict[str, str]] = {}
    for d_i, dom in enumerate(domains):
        vocab = domain_vocab(dom, spec.vocab_per_domain)
        n_fake = int(round(spec.fake_fraction * spec.news_per_domain))
        labels = [1] * n_fake + [0] * (spec.news_per_domain - n_fake)
        labels = list(rng.permutation(labels))
        for k, lab in enumerate(labels):
            toks = list(rng.choice(vocab, size=spec.style_tokens)) + list(rng.choice(filler, size=spec.filler_tokens))
            if lab:
                toks.append(CUE_TOKEN)
            for _, _, words in FEATURE_WORDS:
                if rng.random() < (spec.feature_rate_fake if lab else spec.feature_rate_true):
                    toks.append(str(rng.choice(words)))
            toks = [str(x) for x in rng.permutation(toks)]
            nid = f"{dom[:3]}{k:04d}"
            # domains publish side by side, so recent history spans domains
            t = float((k * spec.n_domains + d_i) * 10 + rng.integers(0, 5)) * 60.0
            news.append(NewsItem(nid, dom, " ".join(toks), VeracityLabel(int(lab)), t))
            feats[nid] = _features_of(set(toks))

    engagements: list[EngagementRecord] = []
    user_rules: dict[str, tuple[str, str]] = {}
    user_types: dict[str, str] = {}
    n_common = int(round(spec.common_fraction * spec.users))
    arch_names = list(ARCHETYPES)
    for u in range(spec.users):
        uid = f"u{u:04d}"
        if u < n_common:
            kind = arch_names[u % len(arch_names)]
            rule = ARCHETYPES[kind]["rule"]
        else:
            kind = "fan"
            rule = ("news_domain", domains[u % len(domains)])
        user_rules[uid] = rule
        user_types[uid] = kind
        for item in news:
            f = feats[item.id]
            val = item.domain if rule[0] == "news_domain" else f[rule[0]]
            if val != rule[1] or rng.random() >= spec.engage_prob:
                continue
            if kind == "fan":
                comment = f"more {item.domain} updates"
            else:
                comment = ARCHETYPES[kind]["fake" if item.label else "true"]
            engagements.append(EngagementRecord(uid, item.id, comment, item.timestamp + 1 + u))
    world = SyntheticWorld(Corpus(news, engagements), mock_rules(domains, spec.vocab_per_domain), user_rules,
                           user_types)
    return world


def desk_config(corpus: str, rules: str | None, out_dir: str, cache_dir: str | None = None) -> PipelineConfig:
    """A configuration sized for synthetic corpora on one CPU core."""
    return PipelineConfig(
        paths=Paths(corpus=corpus, cache_dir=cache_dir, out_dir=out_dir),
        backend=BackendConfig(kind="mock", rules=rules),
        embedder=EmbedderConfig(kind="hash", dim=64),
        model=ModelConfig(d_in=64, d_z=16, heads=2, layers=1, dropout=0.1, k_cap=8, m_cap=8),
        train=TrainConfig(learning_rate=1e-3, epochs=100, early_stop_patience=20),
    )


def write_world(world: SyntheticWorld, out_dir: str | Path) -> dict[str, Path]:
    """Save corpus, mock rules, user rules and a matching desk config."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"corpus": out / "corpus.jsonl", "rules": out / "rules.json", "users": out / "users.json",
             "config": out / "config.json"}
    save_corpus(world.corpus, paths["corpus"])
    world.rules.save(paths["rules"])
    paths["users"].write_text(json.dumps(
        {u: {"type": world.user_types[u], "rule": list(r)} for u, r in sorted(world.user_rules.items())},
        indent=2, sort_keys=True) + "\n")
    save_config(desk_config(str(paths["corpus"]), str(paths["rules"]), str(out / "run")), paths["config"])
    return paths
