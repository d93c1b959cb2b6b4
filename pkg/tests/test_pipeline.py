import json
from dataclasses import replace
from pathlib import Path

import pytest

from daud.cli import main
from daud.config import PipelineConfig, load_config, save_config
from daud.data import Setting, SplitPlan, build_split, load_corpus
from daud.errors import LeakageError
from daud.evaluation import evaluate_setting
from daud.llm import MockBackend
from daud.mock import MockRuleTable
from daud.pipeline import run_pipeline
from daud.stages import ArtifactStore, Stages
from daud.synth import CUE_TOKEN, SyntheticSpec, generate_synthetic, write_world

SMALL = SyntheticSpec(news_per_domain=12, users=8, filler_tokens=20, vocab_per_domain=10, filler_vocab=50)


def _small_cfg(cfg: PipelineConfig) -> PipelineConfig:
    return replace(cfg, train=replace(cfg.train, epochs=2, seeds=(0,)), augment_T=3)


@pytest.fixture
def world_dir(tmp_path):
    paths = write_world(generate_synthetic(SMALL), tmp_path / "world")
    cfg = _small_cfg(load_config(paths["config"]))
    cfg = cfg.with_overrides(out_dir=str(tmp_path / "out"), cache_dir=str(tmp_path / "cache"), target="politics")
    save_config(cfg, paths["config"])
    return paths, cfg


def test_synthetic_world_shape():
    w = generate_synthetic(SMALL)
    assert len(w.corpus.domains) == 3 and len(w.corpus) == 36
    fake = [n for n in w.corpus.news.values() if n.label]
    assert all(CUE_TOKEN in n.text.split() for n in fake)
    assert not any(CUE_TOKEN in n.text.split() for n in w.corpus.news.values() if not n.label)
    assert generate_synthetic(SMALL).corpus == w.corpus


def test_stage_resume(world_dir):
    paths, cfg = world_dir
    first = run_pipeline(cfg)
    built = {p.parent.name for p in Path(cfg.paths.out_dir, "artifacts").glob("*/*")}
    assert {"ingest", "enrich", "styles", "profiles", "augment", "embed", "train", "evaluate"} <= built
    # drop one stage output: only that stage is rebuilt
    for p in Path(cfg.paths.out_dir, "artifacts", "profiles").iterdir():
        p.unlink()
    backend = MockBackend(MockRuleTable.load(paths["rules"]))
    second = run_pipeline(cfg, backend=backend)
    assert second == first
    log = [json.loads(l) for l in Path(cfg.paths.out_dir, "run-log.jsonl").read_text().splitlines()]
    rebuilt = {s for s, _, built in log[-1]["stages"] if built}
    assert rebuilt == {"profiles"}
    assert backend.calls == 0  # warm response cache


def test_stage_errors_name_the_stage(world_dir, capsys):
    paths, cfg = world_dir
    code = main(["run", "--config", str(paths["config"]), "--target", "atlantis"])
    assert code == 3
    assert main(["run", "--out-dir", str(Path(cfg.paths.out_dir))]) == 2
    assert "paths.corpus" in capsys.readouterr().err


def test_cli_run_and_report(world_dir, capsys):
    paths, cfg = world_dir
    assert main(["run", "--config", str(paths["config"])]) == 0
    out = capsys.readouterr().out
    assert "| Setting | Target |" in out
    assert main(["report", "--config", str(paths["config"]), "--format", "json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["target_domain"] == "politics" and doc["seeds"] == [0]


def test_cli_synth(tmp_path, capsys):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps(SMALL.to_json()))
    assert main(["synth", "--spec", str(spec), "--out-dir", str(tmp_path / "w")]) == 0
    assert len(load_corpus(tmp_path / "w" / "corpus.jsonl")) == 36


def test_cli_stage_commands(world_dir):
    paths, cfg = world_dir
    assert main(["enrich", "--config", str(paths["config"])]) == 0
    assert list(Path(cfg.paths.out_dir, "artifacts", "enrich").iterdir())
    assert not Path(cfg.paths.out_dir, "artifacts", "train").exists()


def test_wo_ldae_makes_no_llm_calls(world_dir):
    paths, cfg = world_dir
    corpus = load_corpus(paths["corpus"])
    stages = Stages(corpus, replace(cfg, variant="wo_ldae"), None)
    rep = evaluate_setting(corpus, "unseen", "politics", (0,), replace(cfg, variant="wo_ldae"), stages=stages)
    assert rep.variant == "wo_ldae" and rep.per_seed[0].auc is not None


def test_poisoned_splitter_aborts(world_dir):
    paths, cfg = world_dir
    corpus = load_corpus(paths["corpus"])

    def poisoned(c, setting, target, seed=0):
        plan = build_split(c, setting, target, seed=seed)
        leak = sorted(plan.test)[0]
        return SplitPlan(plan.setting, target, plan.train | {leak}, plan.val, plan.test - {leak}, seed)

    with pytest.raises(LeakageError):
        evaluate_setting(corpus, "unseen", "politics", (0,), cfg, MockBackend({}), splitter=poisoned)


def test_augmentation_stays_out_of_test(world_dir):
    paths, cfg = world_dir
    corpus = load_corpus(paths["corpus"])
    stages = Stages(corpus, cfg, MockBackend(MockRuleTable.load(paths["rules"])), None, ArtifactStore())
    plan = build_split(corpus, Setting.UNSEEN, "politics")
    recs = stages.augment(plan)
    assert recs and not {r.news_id for r in recs} & plan.test
