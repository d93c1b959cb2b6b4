import numpy as np
import pytest

from daud.data import Corpus, EngagementRecord, NewsItem, VeracityLabel
from daud.dsra import ModelConfig, NewsBundle, UserBundle


def tiny_model_config(**kw) -> ModelConfig:
    base = dict(d_in=8, d_z=4, heads=2, layers=1, dropout=0.0, k_cap=4, m_cap=4, n_domains=2)
    base.update(kw)
    return ModelConfig(**base)


def random_bundle(rng: np.random.Generator, cfg: ModelConfig, n_users: int = 2, n_eng: int = 2,
                  label: float | None = 1.0, domain: int = 0) -> NewsBundle:
    d = cfg.d_in
    users = [UserBundle(rng.normal(size=d), [(rng.normal(size=d), rng.normal(size=d)) for _ in range(n_eng)],
                        [int(rng.integers(cfg.n_domains)) for _ in range(n_eng)])
             for _ in range(n_users)]
    return NewsBundle(rng.normal(size=d), rng.normal(size=d), users, domain, label)


def small_corpus() -> Corpus:
    """Three domains, four items each (two per label), a handful of users."""
    news, engs = [], []
    for d_i, dom in enumerate(("alpha", "beta", "gamma")):
        for k in range(4):
            lab = VeracityLabel.FAKE if k % 2 else VeracityLabel.TRUE
            words = "shocking rumor" if lab else "calm report"
            news.append(NewsItem(f"{dom}{k}", dom, f"{dom} story {k} {words}", lab, float(100 * k + d_i)))
    for u in range(3):
        for n in news[u::3]:
            engs.append(EngagementRecord(f"user{u}", n.id, f"comment by {u} on {n.id}", n.timestamp + 1))
    return Corpus(news, engs)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_cfg():
    return tiny_model_config()


@pytest.fixture
def corpus():
    return small_corpus()


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(mod.RESULTS):
            terminalreporter.write_line(mod.RESULTS[n])
