"""Experiment matrix: per-seed split, train and test, then aggregation."""
from __future__ import annotations

import logging
from collections.abc import Callable, Iterable

from .config import PipelineConfig
from .data import Corpus, Setting, SplitPlan, assert_no_leakage, build_split
from .report import RunReport
from .stages import ArtifactStore, Stages

log = logging.getLogger(__name__)


def evaluate_setting(corpus: Corpus, setting: Setting | str, target: str, seeds: Iterable[int],
                     cfg: PipelineConfig, backend=None, cache=None, artifacts: ArtifactStore | None = None,
                     splitter: Callable[..., SplitPlan] = build_split, stages: Stages | None = None) -> RunReport:
    """Train and test once per seed; any failing seed aborts the whole report.

    Under the unseen setting every split is checked for target leakage
    before anything is trained on it.
    """
    setting = Setting(setting)
    seeds = tuple(int(s) for s in seeds)
    if stages is None:
        stages = Stages(corpus, cfg, backend, cache, artifacts)
    per_seed = []
    for seed in seeds:
        plan = splitter(corpus, setting, target, seed=seed)
        if setting is Setting.UNSEEN:
            assert_no_leakage(plan, corpus)
        metrics = stages.evaluate(plan, seed)
        log.info("%s/%s/%s seed %d: auc=%s f1=%.4f", setting.value, target, cfg.variant, seed, metrics.auc,
                 metrics.f1)
        per_seed.append(metrics)
    start, end = corpus.time_span()
    return RunReport.assemble(setting.value, target, cfg.variant, seeds, per_seed, cfg.digest(),
                              {"corpus_start": start, "corpus_end": end})
