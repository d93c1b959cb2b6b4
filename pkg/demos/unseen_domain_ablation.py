"""Unseen-domain runs of the full model and both ablations on a synthetic corpus.

Fake items share a cue token across domains and users react to them in
camp-specific words, so the comments carry signal the model can transfer.
A reduced seed count keeps this under a few minutes.

    python demos/unseen_domain_ablation.py [n_seeds]
"""
import sys
from dataclasses import replace

import numpy as np

from daud.evaluation import evaluate_setting
from daud.llm import MockBackend
from daud.report import render_report
from daud.stages import Stages
from daud.synth import SyntheticSpec, desk_config, generate_synthetic

n_seeds = int(sys.argv[1]) if len(sys.argv) > 1 else 2
world = generate_synthetic(SyntheticSpec())
base = desk_config("unused.jsonl", None, "daud-demo")
base = replace(base, train=replace(base.train, seeds=tuple(range(n_seeds))))

summary = {}
for variant in ("full", "wo_ldae", "wo_dsra"):
    cfg = replace(base, variant=variant)
    stages = Stages(world.corpus, cfg, MockBackend(world.rules))
    aucs = []
    for target in sorted(world.corpus.domains):
        rep = evaluate_setting(world.corpus, "unseen", target, cfg.seeds, cfg, stages=stages)
        print(render_report(rep, "md"))
        aucs.append(rep.mean["auc"])
    summary[variant] = float(np.mean(aucs))

for variant, auc in summary.items():
    print(f"{variant:8s} mean AUC {auc:.4f}")
