"""Enrich a small synthetic corpus and watch one user's profile get refined.

    python demos/profile_refinement.py
"""
from daud.agent import AgentConfig, refine_profile
from daud.ldae import enrich_corpus
from daud.llm import MockBackend
from daud.synth import SyntheticSpec, generate_synthetic

world = generate_synthetic(SyntheticSpec(news_per_domain=30, users=8, engage_prob=1.0))
corpus = world.corpus
backend = MockBackend(world.rules)

enriched = enrich_corpus(corpus, backend)
nid = sorted(corpus.news)[0]
print("news", nid, "label", corpus.news[nid].label.to_json())
print("  summary:", enriched[nid].summary)
print()

uid = "u0002"
print("user", uid, "follows the rule", world.user_rules[uid])
history = [corpus.news[e.news_id] for e in corpus.user_engagements(uid)]
profile = refine_profile(uid, history, corpus, enriched, backend, cfg=AgentConfig(max_iters=3))

for step in profile.trace:
    print(f"iteration {step.iteration}: accuracy {step.accuracy:.2f}, {step.mispredictions} mispredicted")
    print("  profile now:", step.updated_profile_text)
print("backend calls:", backend.calls)
