"""End-to-end orchestration: config in, persisted artifacts and a run report out."""
from __future__ import annotations

import hashlib
import json
import logging
import time
from pathlib import Path

from .config import PipelineConfig
from .data import Corpus, build_split, corpus_records, load_corpus, parse_records
from .errors import ConfigError
from .evaluation import evaluate_setting
from .llm import HttpBackend, MockBackend, ResponseCache
from .mock import MockRuleTable, default_rules
from .report import RunReport, render_report
from .stages import STAGES, ArtifactStore, Stages, _write_atomic

log = logging.getLogger(__name__)

REPORT_JSON = "report.json"
REPORT_MD = "report.md"


def make_backend(cfg: PipelineConfig):
    if cfg.backend.kind == "mock":
        rules = MockRuleTable.load(cfg.backend.rules) if cfg.backend.rules else default_rules()
        return MockBackend(rules)
    return HttpBackend(cfg.backend.endpoint, cfg.backend.model)


def ingest(cfg: PipelineConfig, artifacts: ArtifactStore) -> Corpus:
    """Validate the corpus file and keep a normalised copy keyed by its bytes."""
    path = cfg.require_corpus()
    raw = path.read_bytes()
    key = hashlib.sha256(raw).hexdigest()

    def dump(corpus):
        return "".join(json.dumps(r, ensure_ascii=False, sort_keys=True) + "\n"
                       for r in corpus_records(corpus)).encode()

    return artifacts.fetch("ingest", key, lambda: load_corpus(path), dump,
                           lambda b: parse_records(b.decode().splitlines()), "jsonl")


def _plans(cfg: PipelineConfig, corpus: Corpus):
    if not cfg.target_domain:
        raise ConfigError("target_domain")
    return [(seed, build_split(corpus, cfg.setting, cfg.target_domain, seed=seed)) for seed in cfg.seeds]


def run_pipeline(cfg: PipelineConfig, until: str = "evaluate", backend=None) -> RunReport | None:
    """Run the stages up to ``until``; the evaluate stage also writes the report files.

    Completed stage artifacts under ``out_dir/artifacts`` are reused, so a
    repeated run only computes what is missing.
    """
    if until not in STAGES:
        raise ValueError(f"unknown stage {until!r}")
    cfg.require_corpus()
    stop = STAGES.index(until)
    out = Path(cfg.paths.out_dir)
    artifacts = ArtifactStore(out / "artifacts")
    started = time.time()
    corpus = ingest(cfg, artifacts)
    report = None
    if stop > 0:
        backend = backend or make_backend(cfg)
        cache = ResponseCache(cfg.paths.cache_dir) if cfg.paths.cache_dir else None
        stages = Stages(corpus, cfg, backend, cache, artifacts)
        llm = stages.use_llm
        if llm and stop >= STAGES.index("enrich"):
            stages.enrich()
        if llm and stop >= STAGES.index("profiles"):
            stages.styles()
            stages.profiles()
        if stop >= STAGES.index("augment"):
            for seed, plan in _plans(cfg, corpus):
                stages.augment(plan)
                if stop >= STAGES.index("embed"):
                    stages.batches(plan)
                if stop >= STAGES.index("train") and until != "evaluate":
                    stages.train(plan, seed)
        if until == "evaluate":
            report = evaluate_setting(corpus, cfg.setting, cfg.target_domain, cfg.seeds, cfg, stages=stages)
            _write_atomic(out / REPORT_JSON, render_report(report, "json").encode())
            _write_atomic(out / REPORT_MD, render_report(report, "markdown").encode())
        log.info("backend calls this run: %s", getattr(backend, "calls", "n/a"))
    # timing lives beside the report so the report itself stays replayable
    with open(out / "run-log.jsonl", "a", encoding="utf-8") as fh:
        fh.write(json.dumps({"until": until, "config_digest": cfg.digest(), "started": started,
                             "seconds": round(time.time() - started, 3),
                             "stages": [[e.stage, e.key[:16], e.built] for e in artifacts.events]}) + "\n")
    return report
