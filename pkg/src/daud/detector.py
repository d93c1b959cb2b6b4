"""Prediction head, losses, the training loop and finite-difference checks."""
from __future__ import annotations

import copy
import json
import math
import tempfile
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .dsra import DSRA, DTYPE, Batch, ConcatEncoder, ModelConfig, NewsBundle, collate, state_from_json, state_to_json
from .errors import DimensionMismatch, InvalidEpsilon, NonFiniteLoss
from .metrics import compute_metrics

CLAMP = 1e-12
VARIANTS = ("full", "wo_ldae", "wo_dsra")


@dataclass
class TrainConfig:
    learning_rate: float = 1e-4
    warmup_fraction: float = 0.10
    batch_size: int = 32
    epochs: int = 100
    dropout: float = 0.1
    weight_decay: float = 0.01
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    early_stop_patience: int = 10
    class_weighting: bool = False

    def __post_init__(self):
        self.seeds = tuple(self.seeds)
        if not 0.0 <= self.warmup_fraction < 1.0:
            raise ValueError("warmup_fraction must lie in [0, 1)")
        if self.batch_size < 1 or self.epochs < 0 or self.learning_rate < 0 or self.weight_decay < 0:
            raise ValueError("batch_size must be positive; epochs, learning_rate, weight_decay non-negative")

    def to_json(self) -> dict:
        doc = asdict(self)
        doc["seeds"] = list(self.seeds)
        return doc


# -- head and losses -------------------------------------------------------------

def predict_proba(z_n, z_u, head: nn.Linear) -> torch.Tensor:
    """sigma(W [z_N || z_U] + b)."""
    z_n = torch.as_tensor(z_n, dtype=DTYPE)
    z_u = torch.as_tensor(z_u, dtype=DTYPE)
    x = torch.cat([z_n, z_u], dim=-1)
    if x.shape[-1] != head.in_features:
        raise DimensionMismatch(f"head expects {head.in_features} inputs, got {x.shape[-1]}")
    return torch.sigmoid(head(x)).squeeze(-1)


def detection_loss(y_hat, y, weights=None) -> torch.Tensor:
    """Mean binary cross-entropy with predictions clamped 1e-12 away from 0 and 1."""
    y_hat = torch.as_tensor(y_hat, dtype=DTYPE).clamp(CLAMP, 1.0 - CLAMP)
    y = torch.as_tensor(y, dtype=DTYPE)
    per = -(y * torch.log(y_hat) + (1 - y) * torch.log(1 - y_hat))
    if weights is not None:
        return (per * weights).sum() / weights.sum()
    return per.mean()


def domain_loss(logits: list[torch.Tensor], labels: list[torch.Tensor]) -> torch.Tensor:
    """Average over levels of the mean domain cross-entropy; empty levels are skipped."""
    terms = [nn.functional.cross_entropy(lg, lb) for lg, lb in zip(logits, labels) if lg.shape[0] > 0]
    if not terms:
        return torch.zeros((), dtype=DTYPE)
    return torch.stack(terms).mean()


def total_loss(y_hat, y, domain_logits, domain_labels, lambda_dom: float, weights=None) -> torch.Tensor:
    det = detection_loss(y_hat, y, weights)
    if lambda_dom == 0 or not domain_logits:
        return det
    return det + lambda_dom * domain_loss(domain_logits, domain_labels)


# -- model -------------------------------------------------------------------

class Detector(nn.Module):
    """Representation encoder plus the sigmoid prediction head."""

    def __init__(self, cfg: ModelConfig, variant: str = "full", seed: int = 0):
        super().__init__()
        if variant not in VARIANTS:
            raise ValueError(f"unknown variant {variant!r}")
        self.cfg = cfg
        self.variant = variant
        self.seed = seed
        self.encoder = ConcatEncoder(cfg, seed) if variant == "wo_dsra" else DSRA(cfg, seed)
        self.head = nn.Linear(sum(self.encoder.out_dims), 1, dtype=DTYPE)
        gen = torch.Generator().manual_seed(seed + 7919)
        bound = 1.0 / math.sqrt(self.head.in_features)
        with torch.no_grad():
            self.head.weight.copy_(torch.rand(self.head.weight.shape, generator=gen, dtype=DTYPE) * 2 * bound - bound)
            self.head.bias.zero_()

    def forward(self, batch: Batch):
        rep = self.encoder(batch)
        return predict_proba(rep.z_n, rep.z_u, self.head), rep

    def loss(self, batch: Batch, weights=None) -> torch.Tensor:
        probs, rep = self(batch)
        return total_loss(probs, batch.y, [t.logits for t in rep.domain_terms],
                          [t.labels for t in rep.domain_terms], self.cfg.lambda_dom, weights)

    @torch.no_grad()
    def predict(self, batch: Batch) -> np.ndarray:
        was = self.training
        self.eval()
        probs, _ = self(batch)
        self.train(was)
        return probs.numpy().copy()

    # checkpoints
    def to_json(self, optimizer: torch.optim.Optimizer | None = None) -> dict:
        doc = {"config": self.cfg.to_json(), "variant": self.variant, "seed": self.seed,
               "tensors": state_to_json(self)}
        if optimizer is not None:
            doc["optimizer"] = _optimizer_to_json(optimizer)
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "Detector":
        model = cls(ModelConfig(**doc["config"]), doc["variant"], doc["seed"])
        state_from_json(model, doc["tensors"])
        return model

    def save(self, path: str | Path, optimizer=None) -> None:
        Path(path).write_text(json.dumps(self.to_json(optimizer)))

    @classmethod
    def load(cls, path: str | Path) -> "Detector":
        return cls.from_json(json.loads(Path(path).read_text()))


def _optimizer_to_json(opt: torch.optim.Optimizer) -> dict:
    sd = opt.state_dict()
    state = {str(k): {n: (v.tolist() if torch.is_tensor(v) else v) for n, v in s.items()}
             for k, s in sd["state"].items()}
    return {"state": state, "param_groups": sd["param_groups"]}


# -- training ------------------------------------------------------------------

def lr_factor(step: int, total_steps: int, warmup_fraction: float) -> float:
    warm = warmup_fraction * total_steps
    if warm <= 0:
        return 1.0
    return min(1.0, step / warm)


def _subset(batch: Batch, idx: torch.Tensor) -> Batch:
    return Batch(*(None if v is None else v[idx] for v in (
        batch.h_x, batch.h_d, batch.h_p, batch.user_mask, batch.h_e, batch.h_c, batch.eng_mask,
        batch.news_domain, batch.eng_domain, batch.y)))


def _class_weights(y: torch.Tensor) -> torch.Tensor:
    pos = y.sum().clamp(min=1.0)
    neg = (len(y) - y.sum()).clamp(min=1.0)
    return torch.where(y > 0.5, len(y) / (2 * pos), len(y) / (2 * neg))


def train(model: Detector, train_set: list[NewsBundle] | Batch, val_set: list[NewsBundle] | Batch | None,
          cfg: TrainConfig, seed: int = 0, dump_dir: str | Path | None = None) -> tuple[Detector, list[dict]]:
    """AdamW with linear warm-up, early stopping on validation AUC.

    Returns the model loaded with its best-validation parameters and the
    per-epoch history. Runs single-threaded so results are reproducible.
    """
    train_b = train_set if isinstance(train_set, Batch) else collate(train_set, model.cfg)
    val_b = val_set if (val_set is None or isinstance(val_set, Batch)) else (
        collate(val_set, model.cfg) if val_set else None)
    n = len(train_b)
    steps_per_epoch = math.ceil(n / cfg.batch_size)
    total_steps = steps_per_epoch * cfg.epochs
    opt = torch.optim.AdamW(model.parameters(), lr=cfg.learning_rate, weight_decay=cfg.weight_decay)
    sched = torch.optim.lr_scheduler.LambdaLR(
        opt, lambda s: lr_factor(s, total_steps, cfg.warmup_fraction))
    history: list[dict] = []
    best_score = -math.inf
    best_state = copy.deepcopy(model.state_dict())
    stale = 0
    threads = torch.get_num_threads()
    torch.set_num_threads(1)
    try:
        with torch.random.fork_rng():
            torch.manual_seed(seed)
            gen = torch.Generator().manual_seed(seed)
            step = 0
            for epoch in range(1, cfg.epochs + 1):
                model.train()
                order = torch.randperm(n, generator=gen)
                losses = []
                for s in range(steps_per_epoch):
                    mb = _subset(train_b, order[s * cfg.batch_size:(s + 1) * cfg.batch_size])
                    weights = _class_weights(mb.y) if cfg.class_weighting else None
                    loss = model.loss(mb, weights)
                    if not torch.isfinite(loss):
                        path = _dump(model, opt, step, dump_dir)
                        raise NonFiniteLoss(step, path)
                    opt.zero_grad()
                    loss.backward()
                    opt.step()
                    sched.step()
                    step += 1
                    losses.append(loss.item())
                record = {"epoch": epoch, "train_loss": float(np.mean(losses)), "lr": opt.param_groups[0]["lr"]}
                if val_b is not None:
                    model.eval()
                    with torch.no_grad():
                        probs, _ = model(val_b)
                        val_loss = detection_loss(probs, val_b.y).item()
                    m = compute_metrics(val_b.y.numpy().astype(int), probs.numpy())
                    record.update(val_loss=val_loss, val_auc=m.auc, val_f1=m.f1, val_accuracy=m.accuracy)
                    score = m.auc if m.auc is not None else -val_loss
                    if score > best_score:
                        best_score, stale = score, 0
                        best_state = copy.deepcopy(model.state_dict())
                    else:
                        stale += 1
                else:
                    best_state = copy.deepcopy(model.state_dict())
                history.append(record)
                if val_b is not None and stale >= cfg.early_stop_patience:
                    break
    finally:
        torch.set_num_threads(threads)
    model.load_state_dict(best_state)
    model.eval()
    return model, history


def _dump(model: Detector, opt, step: int, dump_dir) -> str:
    root = Path(dump_dir) if dump_dir is not None else Path(tempfile.mkdtemp(prefix="daud-nonfinite-"))
    root.mkdir(parents=True, exist_ok=True)
    path = root / f"state_step{step}.json"
    path.write_text(json.dumps(model.to_json(opt)))
    return str(path)


# -- gradient checking ----------------------------------------------------------

def gradient_check(model: Detector, batch: Batch, eps: float = 1e-4, params: list[str] | None = None,
                   floor: float = 1e-8) -> float:
    """Largest per-tensor relative error between autograd and central differences.

    Error for a tensor is ``|g_a - g_n| / max(|g_a| + |g_n|, floor)`` with
    Euclidean norms. Gradient reversal is switched off for the check so both
    sides differentiate the same scalar; dropout is disabled.
    """
    if not eps > 0:
        raise InvalidEpsilon(f"eps must be positive, got {eps}")
    model.eval()
    model.encoder.set_gradient_reversal(False)
    try:
        named = dict(model.named_parameters())
        names = params if params is not None else list(named)
        model.zero_grad()
        model.loss(batch).backward()
        worst = 0.0
        with torch.no_grad():
            for name in names:
                p = named[name]
                analytic = p.grad.detach().clone() if p.grad is not None else torch.zeros_like(p)
                numeric = torch.zeros_like(p)
                flat, num = p.view(-1), numeric.view(-1)
                for i in range(flat.numel()):
                    orig = flat[i].item()
                    flat[i] = orig + eps
                    up = model.loss(batch).item()
                    flat[i] = orig - eps
                    down = model.loss(batch).item()
                    flat[i] = orig
                    num[i] = (up - down) / (2 * eps)
                err = (analytic - numeric).norm().item() / max((analytic.norm() + numeric.norm()).item(), floor)
                worst = max(worst, err)
    finally:
        model.encoder.set_gradient_reversal(True)
        model.zero_grad()
    return worst
