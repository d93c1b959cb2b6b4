"""Pipeline configuration: one structured file plus command-line overrides."""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace
from importlib import resources
from pathlib import Path

import jsonschema
import yaml

from .agent import AgentConfig
from .augment import DEFAULT_T
from .data import Setting
from .detector import VARIANTS, TrainConfig
from .dsra import ModelConfig
from .errors import ConfigError


@dataclass(frozen=True)
class Paths:
    corpus: str | None = None
    cache_dir: str | None = None
    out_dir: str = "daud-out"


@dataclass(frozen=True)
class BackendConfig:
    kind: str = "mock"
    rules: str | None = None  # mock rule table; built-in rules when absent
    endpoint: str | None = None
    model: str | None = None


@dataclass(frozen=True)
class EmbedderConfig:
    kind: str = "hash"
    dim: int = 768
    endpoint: str | None = None


@dataclass(frozen=True)
class PipelineConfig:
    paths: Paths = field(default_factory=Paths)
    backend: BackendConfig = field(default_factory=BackendConfig)
    embedder: EmbedderConfig = field(default_factory=EmbedderConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    agent: AgentConfig = field(default_factory=AgentConfig)
    setting: str = "unseen"
    target_domain: str | None = None
    variant: str = "full"
    augment_T: int = DEFAULT_T

    @property
    def seeds(self) -> tuple[int, ...]:
        return tuple(self.train.seeds)

    def to_json(self) -> dict:
        doc = asdict(self)
        doc["train"]["seeds"] = list(self.train.seeds)
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "PipelineConfig":
        validate_config(doc)
        sections = {"paths": Paths, "backend": BackendConfig, "embedder": EmbedderConfig,
                    "model": ModelConfig, "train": TrainConfig, "agent": AgentConfig}
        kw = {}
        for name, value in doc.items():
            if name in sections:
                sub = dict(value)
                if name == "train" and "seeds" in sub:
                    sub["seeds"] = tuple(sub["seeds"])
                try:
                    kw[name] = sections[name](**sub)
                except (TypeError, ValueError) as exc:
                    raise ConfigError(f"{name}: {exc}") from exc
            else:
                kw[name] = value
        cfg = cls(**kw)
        cfg.check()
        return cfg

    def check(self) -> None:
        if self.backend.kind not in ("mock", "http"):
            raise ConfigError(f"backend.kind must be mock or http, got {self.backend.kind!r}")
        if self.backend.kind == "http" and not (self.backend.endpoint and self.backend.model):
            raise ConfigError("backend.endpoint and backend.model are required for the http backend")
        if self.embedder.kind not in ("hash", "http"):
            raise ConfigError(f"embedder.kind must be hash or http, got {self.embedder.kind!r}")
        if self.embedder.dim != self.model.d_in:
            raise ConfigError(f"embedder.dim={self.embedder.dim} differs from model.d_in={self.model.d_in}")
        if self.setting not in {s.value for s in Setting}:
            raise ConfigError(f"setting must be general or unseen, got {self.setting!r}")
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {sorted(VARIANTS)}, got {self.variant!r}")
        if self.train.dropout != self.model.dropout:
            raise ConfigError(f"train.dropout={self.train.dropout} differs from model.dropout={self.model.dropout}")
        if not self.train.seeds:
            raise ConfigError("train.seeds is empty")

    def require_corpus(self) -> Path:
        if not self.paths.corpus:
            raise ConfigError("paths.corpus")
        path = Path(self.paths.corpus)
        if not path.is_file():
            raise ConfigError(f"paths.corpus: {path} does not exist")
        return path

    def digest(self) -> str:
        """Digest of the settings that shape results; file locations are left out."""
        doc = self.to_json()
        doc.pop("paths")
        return hashlib.sha256(json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()).hexdigest()

    def with_overrides(self, **flags) -> "PipelineConfig":
        """Apply command-line flags; ``None`` means not given."""
        cfg = self
        paths = {k: flags.pop(k) for k in ("corpus", "cache_dir", "out_dir") if flags.get(k) is not None}
        flags = {k: v for k, v in flags.items() if v is not None}
        if paths:
            cfg = replace(cfg, paths=replace(cfg.paths, **paths))
        if "backend" in flags:
            cfg = replace(cfg, backend=replace(cfg.backend, kind=flags.pop("backend")))
        if "seed" in flags:
            cfg = replace(cfg, train=replace(cfg.train, seeds=(int(flags.pop("seed")),)))
        if "target" in flags:
            flags["target_domain"] = flags.pop("target")
        known = {f.name for f in fields(cfg)}
        unknown = set(flags) - known
        if unknown:
            raise ConfigError(f"unknown override(s): {sorted(unknown)}")
        cfg = replace(cfg, **flags)
        cfg.check()
        return cfg


def _schema(name: str) -> dict:
    return json.loads(resources.files("daud.schemas").joinpath(name).read_text())


def validate_config(doc: dict) -> None:
    try:
        jsonschema.validate(doc, _schema("config.schema.json"))
    except jsonschema.ValidationError as exc:
        where = ".".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {exc.message}") from exc


def load_config(path: str | Path | None) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    try:
        doc = yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"config {path} is not a mapping")
    return PipelineConfig.from_json(doc)


def save_config(cfg: PipelineConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(cfg.to_json(), indent=2, sort_keys=True) + "\n")
