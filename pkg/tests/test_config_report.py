import json

import pytest

from daud.config import PipelineConfig, load_config, save_config, validate_config
from daud.errors import ConfigError, InvariantViolation
from daud.metrics import Metrics
from daud.report import RunReport, parse_report, render_report


def test_defaults_consistent():
    cfg = PipelineConfig()
    cfg.check()
    assert cfg.seeds == (0, 1, 2, 3, 4)
    assert cfg.model.dropout == cfg.train.dropout == 0.1


def test_json_round_trip(tmp_path):
    cfg = PipelineConfig().with_overrides(target="health", seed=3, corpus="c.jsonl")
    save_config(cfg, tmp_path / "c.json")
    assert load_config(tmp_path / "c.json") == cfg


def test_yaml_config(tmp_path):
    (tmp_path / "c.yaml").write_text("setting: general\ntarget_domain: sports\ntrain:\n  epochs: 3\n")
    cfg = load_config(tmp_path / "c.yaml")
    assert cfg.setting == "general" and cfg.train.epochs == 3


@pytest.mark.parametrize("doc", [
    {"setting": "sideways"},
    {"unknown_key": 1},
    {"embedder": {"dim": 32}},
    {"model": {"dropout": 0.3}},
    {"backend": {"kind": "http"}},
    {"train": {"seeds": []}},
])
def test_bad_configs(doc):
    with pytest.raises(ConfigError):
        PipelineConfig.from_json(doc)


def test_missing_corpus():
    with pytest.raises(ConfigError, match="paths.corpus"):
        PipelineConfig().require_corpus()


def test_digest_ignores_paths():
    a = PipelineConfig().with_overrides(out_dir="x", cache_dir="y")
    b = PipelineConfig().with_overrides(out_dir="z")
    assert a.digest() == b.digest()
    assert a.digest() != a.with_overrides(seed=9).digest()


def test_unknown_override():
    with pytest.raises(ConfigError):
        PipelineConfig().with_overrides(flavour="x")


def test_validate_config_accepts_full_dump():
    validate_config(PipelineConfig().to_json())


def _report():
    runs = [Metrics(0.5, 0.6, 0.55, 0.7, 0.8, 10, 10), Metrics(0.7, 0.6, 0.65, 0.75, None, 10, 10)]
    return RunReport.assemble("unseen", "health", "full", (0, 1), runs, "a" * 64,
                              {"corpus_start": 0.0, "corpus_end": 10.0})


def test_report_round_trip():
    rep = _report()
    assert parse_report(render_report(rep, "json")) == rep
    assert render_report(rep) == render_report(parse_report(render_report(rep)))


def test_report_statistics_checked():
    rep = _report()
    with pytest.raises(InvariantViolation):
        RunReport(rep.setting, rep.target_domain, rep.variant, rep.seeds, rep.per_seed,
                  dict(rep.mean, f1=0.1), rep.std, rep.config_digest, rep.timestamps)
    assert rep.mean["auc"] == 0.8 and rep.std["auc"] == 0.0


def test_markdown_table():
    md = render_report(_report(), "md")
    lines = md.strip().splitlines()
    assert lines[0] == "| Setting | Target | Variant | Run | Prec. | Rec. | F1 | AUC |"
    assert len(lines) == 2 + 2 + 1
    assert "—" in lines[3]
    assert "0.6000 ± 0.1414" in lines[-1]


def test_schema_rejects_bad_digest():
    doc = _report().to_json()
    doc["config_digest"] = "nope"
    with pytest.raises(Exception):
        parse_report(json.dumps(doc))
