"""Pipeline stages with content-addressed, resumable artifacts.

Each stage output is keyed by a digest of the stage name, the keys of its
inputs and the settings it reads. With an artifact directory, an existing
key is loaded instead of recomputed; without one, results live in memory.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Any, Callable

from .agent import UserProfile
from .augment import AugmentationResult
from .config import PipelineConfig
from .data import Corpus, EngagementRecord, SplitPlan, corpus_records
from .detector import Detector, train
from .dsra import Batch, collate
from .embed import EmbeddingStore, make_encoder
from .enrich import CommentingFeature, EnrichedNews
from .errors import DaudError
from .features import build_bundles
from .ldae import augment_corpus, build_profiles, commenting_styles, enrich_corpus
from .metrics import Metrics, compute_metrics

log = logging.getLogger(__name__)

STAGES = ("ingest", "enrich", "styles", "profiles", "augment", "embed", "train", "evaluate")


def digest(*parts: Any) -> str:
    blob = json.dumps(parts, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def corpus_digest(corpus: Corpus) -> str:
    return digest(corpus_records(corpus))


def _write_atomic(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    with os.fdopen(fd, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


@dataclass(frozen=True)
class StageEvent:
    stage: str
    key: str
    built: bool


class ArtifactStore:
    """Maps (stage, key) to a file under ``root`` or, without a root, to memory."""

    def __init__(self, root: str | Path | None = None):
        self.root = Path(root) if root is not None else None
        self._memory: dict[tuple[str, str], Any] = {}
        self.events: list[StageEvent] = []

    def path(self, stage: str, key: str, ext: str) -> Path:
        assert self.root is not None
        return self.root / stage / f"{key[:16]}.{ext}"

    def built(self, stage: str | None = None) -> list[StageEvent]:
        return [e for e in self.events if e.built and (stage is None or e.stage == stage)]

    def fetch(self, stage: str, key: str, build: Callable[[], Any], dump: Callable[[Any], bytes],
              load: Callable[[bytes], Any], ext: str = "json") -> Any:
        if self.root is None:
            if (stage, key) in self._memory:
                self.events.append(StageEvent(stage, key, False))
                return self._memory[(stage, key)]
        else:
            path = self.path(stage, key, ext)
            if path.is_file():
                self.events.append(StageEvent(stage, key, False))
                return load(path.read_bytes())
        log.info("stage %s: building %s", stage, key[:12])
        try:
            value = build()
        except DaudError as exc:
            exc.stage = getattr(exc, "stage", None) or stage
            raise
        if self.root is None:
            self._memory[(stage, key)] = value
        else:
            _write_atomic(self.path(stage, key, ext), dump(value))
        self.events.append(StageEvent(stage, key, True))
        return value


def _jsonl(items) -> bytes:
    return "".join(json.dumps(i.to_json(), sort_keys=True, ensure_ascii=False) + "\n" for i in items).encode()


def _rows(blob: bytes) -> list[dict]:
    return [json.loads(line) for line in blob.decode().splitlines() if line.strip()]


def _json(doc) -> bytes:
    return json.dumps(doc, sort_keys=True, ensure_ascii=False).encode()


def backend_identity(cfg: PipelineConfig, backend) -> str:
    rules = getattr(backend, "rules", None)
    if rules is not None:
        return digest("mock", rules.to_json())
    return digest(cfg.backend.kind, cfg.backend.endpoint, cfg.backend.model)


class Stages:
    """Runs the stages for one corpus and configuration, memoising across seeds."""

    def __init__(self, corpus: Corpus, cfg: PipelineConfig, backend=None, cache=None,
                 artifacts: ArtifactStore | None = None, encoder=None):
        self.corpus = corpus
        self.cfg = cfg
        self.backend = backend
        self.cache = cache
        self.artifacts = artifacts or ArtifactStore()
        self.domains = sorted(corpus.domains)
        self.domain_index = {d: i for i, d in enumerate(self.domains)}
        self.model_cfg = replace(cfg.model, n_domains=len(self.domains))
        self.store = EmbeddingStore(encoder or make_encoder(cfg.embedder.kind, cfg.embedder.dim,
                                                            cfg.embedder.endpoint))
        self.corpus_key = corpus_digest(corpus)
        self.backend_key = backend_identity(cfg, backend) if backend is not None else "none"
        self.use_llm = cfg.variant != "wo_ldae"
        self._memo: dict[tuple, Any] = {}

    def _once(self, name: tuple, fn):
        if name not in self._memo:
            self._memo[name] = fn()
        return self._memo[name]

    def _need_backend(self):
        if self.backend is None:
            raise DaudError("this stage needs an LLM backend")
        return self.backend

    # -- LDAE ------------------------------------------------------------------

    def enrich_key(self) -> str:
        return digest("enrich", self.corpus_key, self.backend_key)

    def enrich(self) -> dict[str, EnrichedNews]:
        def run():
            items = self.artifacts.fetch(
                "enrich", self.enrich_key(),
                lambda: list(enrich_corpus(self.corpus, self._need_backend(), self.cache).values()),
                _jsonl, lambda b: [EnrichedNews.from_json(r) for r in _rows(b)], "jsonl")
            return {e.news_id: e for e in items}
        return self._once(("enrich",), run)

    def styles_key(self) -> str:
        return digest("styles", self.corpus_key, self.backend_key)

    def styles(self) -> dict[str, CommentingFeature]:
        def run():
            items = self.artifacts.fetch(
                "styles", self.styles_key(),
                lambda: list(commenting_styles(self.corpus, self._need_backend(), self.cache).values()),
                _jsonl, lambda b: [CommentingFeature.from_json(r) for r in _rows(b)], "jsonl")
            return {s.user_id: s for s in items}
        return self._once(("styles",), run)

    def profiles_key(self) -> str:
        return digest("profiles", self.enrich_key(), self.styles_key(), asdict(self.cfg.agent))

    def profiles(self) -> dict[str, UserProfile]:
        def run():
            enriched, styles = self.enrich(), self.styles()
            items = self.artifacts.fetch(
                "profiles", self.profiles_key(),
                lambda: list(build_profiles(self.corpus, enriched, styles, self._need_backend(), self.cache,
                                            self.cfg.agent).values()),
                _jsonl, lambda b: [UserProfile.from_json(r) for r in _rows(b)], "jsonl")
            return {p.user_id: p for p in items}
        return self._once(("profiles",), run)

    def augment_key(self, plan: SplitPlan) -> str:
        return digest("augment", self.profiles_key(), plan.to_json(), self.cfg.augment_T,
                      asdict(self.cfg.embedder))

    def augment(self, plan: SplitPlan) -> list[EngagementRecord]:
        """Synthetic engagements for one split; only train and validation news are eligible."""
        if not self.use_llm or self.cfg.augment_T <= 0:
            return []

        def run():
            enriched, styles, profiles = self.enrich(), self.styles(), self.profiles()

            def build():
                results, _ = augment_corpus(self.corpus, enriched, profiles, styles, self.store,
                                            self.cfg.augment_T, self._need_backend(), self.cache,
                                            eligible=plan.train | plan.val, test_ids=plan.test)
                return results

            results = self.artifacts.fetch("augment", self.augment_key(plan), build, _jsonl,
                                           lambda b: [AugmentationResult.from_json(r) for r in _rows(b)], "jsonl")
            return [rec for res in results for rec in res.records(self.corpus)]
        return self._once(("augment", plan.to_json()["seed"], digest(plan.to_json())), run)

    # -- model -----------------------------------------------------------------

    def embed_key(self, plan: SplitPlan) -> str:
        upstream = self.augment_key(plan) if self.use_llm else self.corpus_key
        return digest("embed", upstream, plan.to_json(), asdict(self.cfg.embedder), self.use_llm,
                      self.model_cfg.m_cap, self.model_cfg.k_cap)

    def batches(self, plan: SplitPlan) -> tuple[Batch, Batch | None, Batch]:
        def run():
            corpus = self.corpus.with_engagements(self.augment(plan))
            enriched = self.enrich() if self.use_llm else None
            profiles = self.profiles() if self.use_llm else None

            def make(ids):
                return build_bundles(corpus, sorted(ids), self.store, enriched, profiles, self.domain_index,
                                     self.model_cfg.m_cap, self.model_cfg.k_cap, self.use_llm)

            def build():
                return [make(plan.train), make(plan.val), make(plan.test)]

            def dump(_):
                with tempfile.TemporaryFile() as fh:
                    self.store.save(fh)
                    fh.seek(0)
                    return fh.read()

            def load(blob):
                with tempfile.TemporaryFile() as fh:
                    fh.write(blob)
                    fh.seek(0)
                    self.store.load(fh)
                return build()

            tr, va, te = self.artifacts.fetch("embed", self.embed_key(plan), build, dump, load, "npz")
            return (collate(tr, self.model_cfg), collate(va, self.model_cfg) if va else None,
                    collate(te, self.model_cfg))
        return self._once(("embed", digest(plan.to_json())), run)

    def train_key(self, plan: SplitPlan, seed: int) -> str:
        tcfg = self.cfg.train.to_json()
        tcfg.pop("seeds")
        return digest("train", self.embed_key(plan), self.model_cfg.to_json(), tcfg, seed, self.cfg.variant)

    def train(self, plan: SplitPlan, seed: int) -> Detector:
        def build():
            tr, va, _ = self.batches(plan)
            model = Detector(self.model_cfg, self.cfg.variant, seed)
            model, history = train(model, tr, va, self.cfg.train, seed)
            return model, history

        def dump(value):
            model, history = value
            return _json({"checkpoint": model.to_json(), "history": history})

        def load(blob):
            doc = json.loads(blob)
            return Detector.from_json(doc["checkpoint"]), doc["history"]

        return self.artifacts.fetch("train", self.train_key(plan, seed), build, dump, load)[0]

    def evaluate(self, plan: SplitPlan, seed: int) -> Metrics:
        def build():
            model = self.train(plan, seed)
            _, _, te = self.batches(plan)
            return compute_metrics(te.y.numpy().astype(int), model.predict(te))

        key = digest("evaluate", self.train_key(plan, seed))
        return self.artifacts.fetch("evaluate", key, build, lambda m: _json(m.to_json()),
                                    lambda b: Metrics.from_json(json.loads(b)))
