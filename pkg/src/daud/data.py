"""Corpus data model, JSON Lines ingestion and leakage-guarded splits."""
from __future__ import annotations

import enum
import hashlib
import json
import logging
import math
from collections.abc import Iterable, Mapping
from dataclasses import dataclass
from pathlib import Path
from types import MappingProxyType

import numpy as np

from .errors import (
    DanglingReference,
    DataError,
    EmptyClass,
    InsufficientDomains,
    LeakageError,
    MissingField,
    UnknownDomain,
    UnknownLabel,
)

log = logging.getLogger(__name__)

DEFAULT_RATIOS = (0.7, 0.1, 0.2)


class VeracityLabel(enum.IntEnum):
    TRUE = 0
    FAKE = 1

    @classmethod
    def parse(cls, value) -> "VeracityLabel":
        if isinstance(value, VeracityLabel):
            return value
        if isinstance(value, str):
            key = value.strip().lower()
            if key == "fake":
                return cls.FAKE
            if key == "true":
                return cls.TRUE
        raise UnknownLabel(value)

    def to_json(self) -> str:
        return "fake" if self is VeracityLabel.FAKE else "true"


class Setting(str, enum.Enum):
    GENERAL = "general"
    UNSEEN = "unseen"


@dataclass(frozen=True)
class NewsItem:
    id: str
    domain: str
    text: str
    label: VeracityLabel
    timestamp: float | None = None

    def __post_init__(self):
        if not self.domain:
            raise DataError(f"news {self.id!r}: empty domain")
        if not self.text:
            raise DataError(f"news {self.id!r}: empty text")


@dataclass(frozen=True)
class EngagementRecord:
    user_id: str
    news_id: str
    comment: str = ""
    timestamp: float | None = None
    synthetic: bool = False

    @property
    def key(self) -> tuple[str, str]:
        return (self.user_id, self.news_id)


def _sort_key(ts: float | None, position: int) -> tuple:
    # missing timestamps fall back to file order
    return (math.inf if ts is None else ts, position)


class Corpus:
    """Immutable collection of labelled news and the engagements on them."""

    def __init__(self, news: Iterable[NewsItem] | Mapping[str, NewsItem] = (),
                 engagements: Iterable[EngagementRecord] = ()):
        items = news.values() if isinstance(news, Mapping) else news
        table: dict[str, NewsItem] = {}
        for item in items:
            if item.id in table:
                raise DataError(f"duplicate news id {item.id!r}")
            table[item.id] = item
        self._news = MappingProxyType(table)
        engs = tuple(engagements)
        users: dict[str, list[int]] = {}
        for i, e in enumerate(engs):
            if e.news_id not in table:
                raise DanglingReference(e.news_id)
            users.setdefault(e.user_id, []).append(i)
        self._engagements = engs
        self._users = MappingProxyType({u: tuple(ix) for u, ix in users.items()})
        self._domains = frozenset(n.domain for n in table.values())

    @property
    def news(self) -> Mapping[str, NewsItem]:
        return self._news

    @property
    def engagements(self) -> tuple[EngagementRecord, ...]:
        return self._engagements

    @property
    def users(self) -> Mapping[str, tuple[int, ...]]:
        return self._users

    @property
    def domains(self) -> frozenset[str]:
        return self._domains

    def __len__(self):
        return len(self._news)

    def __eq__(self, other):
        if not isinstance(other, Corpus):
            return NotImplemented
        return dict(self._news) == dict(other._news) and self._engagements == other._engagements

    def __repr__(self):
        return (f"Corpus(news={len(self._news)}, engagements={len(self._engagements)}, "
                f"users={len(self._users)}, domains={sorted(self._domains)})")

    def domain_of(self, news_id: str) -> str:
        return self._news[news_id].domain

    def user_engagements(self, user_id: str, *, include_synthetic: bool = True) -> list[EngagementRecord]:
        """A user's engagements in chronological order (file order breaks ties)."""
        idx = self._users.get(user_id, ())
        recs = [(self._engagements[i], i) for i in idx]
        if not include_synthetic:
            recs = [(e, i) for e, i in recs if not e.synthetic]
        recs.sort(key=lambda p: _sort_key(p[0].timestamp, p[1]))
        return [e for e, _ in recs]

    def news_engagements(self) -> dict[str, list[EngagementRecord]]:
        """news id -> engagements on it, chronological."""
        out: dict[str, list[tuple[EngagementRecord, int]]] = {nid: [] for nid in self._news}
        for i, e in enumerate(self._engagements):
            out[e.news_id].append((e, i))
        return {nid: [e for e, _ in sorted(v, key=lambda p: _sort_key(p[0].timestamp, p[1]))]
                for nid, v in out.items()}

    def view(self, domains: Iterable[str]) -> "Corpus":
        keep = set(domains)
        news = [n for n in self._news.values() if n.domain in keep]
        ids = {n.id for n in news}
        return Corpus(news, [e for e in self._engagements if e.news_id in ids])

    def user_ids(self) -> set[str]:
        return set(self._users)

    def with_engagements(self, extra: Iterable[EngagementRecord]) -> "Corpus":
        return Corpus(self._news, self._engagements + tuple(extra))

    def without_synthetic(self) -> "Corpus":
        return Corpus(self._news, [e for e in self._engagements if not e.synthetic])

    def time_span(self) -> tuple[float | None, float | None]:
        stamps = [n.timestamp for n in self._news.values() if n.timestamp is not None]
        stamps += [e.timestamp for e in self._engagements if e.timestamp is not None]
        if not stamps:
            return (None, None)
        return (min(stamps), max(stamps))


def common_users(src: Corpus, tgt: Corpus) -> set[str]:
    """Users that engaged in both corpus views."""
    return src.user_ids() & tgt.user_ids()


# -- JSON Lines I/O ---------------------------------------------------------

def _require(rec: dict, lineno: int, name: str):
    if name not in rec or rec[name] is None:
        raise MissingField(lineno, name)
    return rec[name]


def _dedupe(engagements: list[tuple[EngagementRecord, int]]) -> list[EngagementRecord]:
    best: dict[tuple[str, str], tuple[EngagementRecord, int]] = {}
    dropped = 0
    synthetic = []
    for e, pos in engagements:
        if e.synthetic:
            synthetic.append((e, pos))
            continue
        prev = best.get(e.key)
        if prev is None:
            best[e.key] = (e, pos)
            continue
        dropped += 1
        if _sort_key(e.timestamp, pos) < _sort_key(prev[0].timestamp, prev[1]):
            best[e.key] = (e, pos)
    if dropped:
        log.info("dropped %d duplicate engagement record(s)", dropped)
    kept = sorted(list(best.values()) + synthetic, key=lambda p: p[1])
    return [e for e, _ in kept]


def parse_records(lines: Iterable[str]) -> Corpus:
    news: list[NewsItem] = []
    engagements: list[tuple[EngagementRecord, int]] = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        rec = json.loads(line)
        kind = _require(rec, lineno, "kind")
        if kind == "news":
            ts = rec.get("timestamp")
            news.append(NewsItem(
                id=str(_require(rec, lineno, "id")),
                domain=str(_require(rec, lineno, "domain")),
                text=str(_require(rec, lineno, "text")),
                label=VeracityLabel.parse(_require(rec, lineno, "label")),
                timestamp=None if ts is None else float(ts),
            ))
        elif kind == "engagement":
            ts = rec.get("timestamp")
            engagements.append((EngagementRecord(
                user_id=str(_require(rec, lineno, "user_id")),
                news_id=str(_require(rec, lineno, "news_id")),
                comment=str(rec.get("comment") or ""),
                timestamp=None if ts is None else float(ts),
                synthetic=bool(rec.get("synthetic", False)),
            ), lineno))
        else:
            raise DataError(f"record {lineno}: unknown kind {kind!r}")
    return Corpus(news, _dedupe(engagements))


def load_corpus(path: str | Path) -> Corpus:
    with open(path, encoding="utf-8") as fh:
        return parse_records(fh)


def corpus_records(corpus: Corpus) -> list[dict]:
    out = []
    for n in corpus.news.values():
        rec = {"kind": "news", "id": n.id, "domain": n.domain, "text": n.text, "label": n.label.to_json()}
        if n.timestamp is not None:
            rec["timestamp"] = n.timestamp
        out.append(rec)
    for e in corpus.engagements:
        rec = {"kind": "engagement", "user_id": e.user_id, "news_id": e.news_id, "comment": e.comment}
        if e.timestamp is not None:
            rec["timestamp"] = e.timestamp
        if e.synthetic:
            rec["synthetic"] = True
        out.append(rec)
    return out


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in corpus_records(corpus):
            fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")


# -- splits -----------------------------------------------------------------

@dataclass(frozen=True)
class SplitPlan:
    setting: Setting
    target_domain: str
    train: frozenset[str]
    val: frozenset[str]
    test: frozenset[str]
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "setting", Setting(self.setting))
        for name in ("train", "val", "test"):
            object.__setattr__(self, name, frozenset(getattr(self, name)))
        if self.train & self.test or self.train & self.val:
            raise LeakageError("split sets overlap")

    def to_json(self) -> dict:
        return {
            "setting": self.setting.value,
            "target": self.target_domain,
            "seed": self.seed,
            "train": sorted(self.train),
            "val": sorted(self.val),
            "test": sorted(self.test),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "SplitPlan":
        return cls(Setting(doc["setting"]), doc["target"], frozenset(doc["train"]),
                   frozenset(doc["val"]), frozenset(doc["test"]), int(doc["seed"]))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), sort_keys=True, indent=1))

    @classmethod
    def load(cls, path: str | Path) -> "SplitPlan":
        return cls.from_json(json.loads(Path(path).read_text()))


def assert_no_leakage(plan: SplitPlan, corpus: Corpus) -> None:
    """Guard for the unseen-domain setting: no target item may be trained on."""
    if plan.train & plan.test or plan.train & plan.val:
        raise LeakageError("split sets overlap")
    if plan.setting is Setting.UNSEEN:
        leaked = sorted(i for i in plan.train | plan.val if corpus.news[i].domain == plan.target_domain)
        if leaked:
            raise LeakageError(f"{len(leaked)} target-domain item(s) in train/val, e.g. {leaked[0]!r}")


def _stratum_rng(seed: int, domain: str, label: int) -> np.random.Generator:
    tag = int.from_bytes(hashlib.sha256(f"{domain}\x00{label}".encode()).digest()[:8], "big")
    return np.random.default_rng([seed, tag])


def _floor(x: float) -> int:
    return int(math.floor(x + 1e-9))


def _strata(corpus: Corpus, domain: str) -> dict[VeracityLabel, list[str]]:
    out = {lab: [] for lab in VeracityLabel}
    for n in corpus.news.values():
        if n.domain == domain:
            out[n.label].append(n.id)
    for lab, ids in out.items():
        if not ids:
            raise EmptyClass(domain, lab.to_json())
        ids.sort()
    return out


def build_split(corpus: Corpus, setting: Setting | str, target: str,
                ratios: tuple[float, float, float] = DEFAULT_RATIOS, seed: int = 0) -> SplitPlan:
    """Stratified split for the general or unseen-domain setting.

    Source domains are split into train/val only (proportions train:val);
    the target domain is either held out completely (unseen) or split by
    ``ratios`` with its train/val portions merged in (general).
    """
    setting = Setting(setting)
    if target not in corpus.domains:
        raise UnknownDomain(target)
    if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise DataError(f"split ratios must be three non-negative fractions summing to 1, got {ratios}")
    sources = sorted(corpus.domains - {target})
    need = 2 if setting is Setting.UNSEEN else 1
    if len(sources) < need:
        raise InsufficientDomains(
            f"{setting.value} setting needs >= {need} non-target domain(s), corpus has {len(sources)}")
    r_train, r_val, _ = ratios
    if r_train + r_val <= 0:
        raise DataError("train and val fractions cannot both be zero")

    train: set[str] = set()
    val: set[str] = set()
    test: set[str] = set()
    src_train = r_train / (r_train + r_val)
    for dom in sources:
        for lab, ids in _strata(corpus, dom).items():
            order = list(_stratum_rng(seed, dom, int(lab)).permutation(ids))
            k = _floor(src_train * len(order))
            train.update(order[:k])
            val.update(order[k:])
    for lab, ids in _strata(corpus, target).items():
        if setting is Setting.UNSEEN:
            test.update(ids)
            continue
        order = list(_stratum_rng(seed, target, int(lab)).permutation(ids))
        k_tr = _floor(r_train * len(order))
        k_va = _floor(r_val * len(order))
        train.update(order[:k_tr])
        val.update(order[k_tr:k_tr + k_va])
        test.update(order[k_tr + k_va:])
    plan = SplitPlan(setting, target, frozenset(train), frozenset(val), frozenset(test), seed)
    assert_no_leakage(plan, corpus)
    return plan
