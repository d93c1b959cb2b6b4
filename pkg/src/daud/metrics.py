"""Binary detection metrics with Fake as the positive class."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import rankdata

from .errors import EmptyInput, LengthMismatch

METRIC_FIELDS = ("precision", "recall", "f1", "accuracy", "auc")


@dataclass(frozen=True)
class Metrics:
    precision: float
    recall: float
    f1: float
    accuracy: float
    auc: float | None
    n_pos: int
    n_neg: int
    threshold: float = 0.5

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, doc: dict) -> "Metrics":
        return cls(**doc)


def auc_score(y_true, scores) -> float | None:
    """Mann-Whitney AUC from average ranks; ties count one half. None if a class is missing."""
    y = np.asarray(y_true).astype(int)
    s = np.asarray(scores, dtype=float)
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        return None
    ranks = rankdata(s, method="average")
    u = ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2
    return float(u / (n_pos * n_neg))


def compute_metrics(y_true, scores, threshold: float = 0.5) -> Metrics:
    y = np.asarray(y_true).astype(int)
    s = np.asarray(scores, dtype=float)
    if y.shape != s.shape:
        raise LengthMismatch(f"{y.shape[0] if y.ndim else 0} labels vs {s.shape[0] if s.ndim else 0} scores")
    if y.size == 0:
        raise EmptyInput("no predictions to score")
    pred = s >= threshold
    tp = int(np.sum(pred & (y == 1)))
    fp = int(np.sum(pred & (y == 0)))
    fn = int(np.sum(~pred & (y == 1)))
    tn = int(np.sum(~pred & (y == 0)))
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return Metrics(p, r, f1, (tp + tn) / y.size, auc_score(y, s), tp + fn, tn + fp, threshold)


def aggregate_runs(runs: list[Metrics]) -> tuple[dict[str, float | None], dict[str, float | None]]:
    """Mean and sample standard deviation per metric (0 for a single run).

    AUC statistics skip runs where AUC was undefined and are None if all were.
    """
    if not runs:
        raise EmptyInput("no runs to aggregate")
    mean: dict[str, float | None] = {}
    std: dict[str, float | None] = {}
    for name in METRIC_FIELDS:
        vals = [getattr(m, name) for m in runs if getattr(m, name) is not None]
        if not vals:
            mean[name] = std[name] = None
            continue
        mu = math.fsum(vals) / len(vals)
        mean[name] = mu
        std[name] = math.sqrt(math.fsum((v - mu) ** 2 for v in vals) / (len(vals) - 1)) if len(vals) > 1 else 0.0
    return mean, std
