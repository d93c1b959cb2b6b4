"""Run reports: JSON documents and the markdown results table."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

import jsonschema

from .errors import InvariantViolation
from .metrics import METRIC_FIELDS, Metrics, aggregate_runs

ABSENT = "—"
TABLE_COLUMNS = (("precision", "Prec."), ("recall", "Rec."), ("f1", "F1"), ("auc", "AUC"))


@dataclass(frozen=True)
class RunReport:
    setting: str
    target_domain: str
    variant: str
    seeds: tuple[int, ...]
    per_seed: tuple[Metrics, ...]
    mean: dict[str, float | None]
    std: dict[str, float | None]
    config_digest: str
    timestamps: dict[str, float | None] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.seeds) != len(self.per_seed):
            raise InvariantViolation(f"{len(self.seeds)} seeds but {len(self.per_seed)} metric entries")
        mean, std = aggregate_runs(list(self.per_seed))
        for name in METRIC_FIELDS:
            for got, want in ((self.mean.get(name), mean[name]), (self.std.get(name), std[name])):
                if (got is None) != (want is None) or (got is not None and abs(got - want) > 1e-12):
                    raise InvariantViolation(f"report statistics for {name} do not match the per-seed values")

    @classmethod
    def assemble(cls, setting: str, target: str, variant: str, seeds, per_seed, config_digest: str,
                 timestamps: dict | None = None) -> "RunReport":
        mean, std = aggregate_runs(list(per_seed))
        return cls(setting, target, variant, tuple(seeds), tuple(per_seed), mean, std, config_digest,
                   dict(timestamps or {}))

    def to_json(self) -> dict:
        return {"setting": self.setting, "target_domain": self.target_domain, "variant": self.variant,
                "seeds": list(self.seeds), "per_seed": [m.to_json() for m in self.per_seed],
                "mean": dict(self.mean), "std": dict(self.std), "config_digest": self.config_digest,
                "timestamps": dict(self.timestamps)}

    @classmethod
    def from_json(cls, doc: dict) -> "RunReport":
        validate_report(doc)
        return cls(doc["setting"], doc["target_domain"], doc["variant"], tuple(doc["seeds"]),
                   tuple(Metrics.from_json(m) for m in doc["per_seed"]), dict(doc["mean"]), dict(doc["std"]),
                   doc["config_digest"], dict(doc["timestamps"]))


def validate_report(doc: dict) -> None:
    schema = json.loads(resources.files("daud.schemas").joinpath("report.schema.json").read_text())
    jsonschema.validate(doc, schema)


def _cell(value: float | None) -> str:
    return ABSENT if value is None else f"{value:.4f}"


def _markdown(report: RunReport) -> str:
    head = ["Setting", "Target", "Variant", "Run"] + [label for _, label in TABLE_COLUMNS]
    lines = ["| " + " | ".join(head) + " |", "|" + "---|" * len(head)]
    ctx = [report.setting, report.target_domain, report.variant]
    for seed, m in zip(report.seeds, report.per_seed):
        lines.append("| " + " | ".join(ctx + [f"seed {seed}"] + [_cell(getattr(m, k)) for k, _ in TABLE_COLUMNS])
                     + " |")
    stats = []
    for k, _ in TABLE_COLUMNS:
        mu, sd = report.mean[k], report.std[k]
        stats.append(ABSENT if mu is None else f"{mu:.4f} ± {sd:.4f}")
    lines.append("| " + " | ".join(ctx + ["mean ± std"] + stats) + " |")
    return "\n".join(lines) + "\n"


def render_report(report: RunReport, fmt: str = "json") -> str:
    if fmt == "json":
        return json.dumps(report.to_json(), indent=2, sort_keys=True, ensure_ascii=False) + "\n"
    if fmt in ("markdown", "md"):
        return _markdown(report)
    raise ValueError(f"unknown report format {fmt!r}")


def parse_report(text: str) -> RunReport:
    return RunReport.from_json(json.loads(text))
