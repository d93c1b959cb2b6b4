"""Push one random news bundle through DSRA and check its gradients.

    python demos/dsra_forward.py
"""
import numpy as np

from daud.detector import Detector, gradient_check
from daud.dsra import ModelConfig, NewsBundle, UserBundle, collate, dsra_forward

cfg = ModelConfig(d_in=8, d_z=4, heads=2, layers=1, dropout=0.0, k_cap=4, m_cap=4, n_domains=2)
rng = np.random.default_rng(0)


def bundle(label, n_users=2, n_eng=2):
    users = [UserBundle(rng.normal(size=8), [(rng.normal(size=8), rng.normal(size=8)) for _ in range(n_eng)])
             for _ in range(n_users)]
    return NewsBundle(rng.normal(size=8), rng.normal(size=8), users, domain=0, label=label)


model = Detector(cfg, "full", seed=0)
rep = dsra_forward(bundle(1.0), model.encoder.eval())
print("z_N", np.round(rep.z_n.detach().numpy(), 4))
print("z_U", np.round(rep.z_u.detach().numpy(), 4))

# a news item nobody engaged with falls back to a learned token
empty = dsra_forward(bundle(0.0, n_users=0), model.encoder)
print("no users -> fallback token:", bool((empty.z_u == model.encoder.no_engagement).all()))

batch = collate([bundle(1.0), bundle(0.0)], cfg)
print("max relative gradient error:", f"{gradient_check(model, batch):.2e}")
