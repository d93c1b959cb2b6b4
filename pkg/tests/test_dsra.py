import math

import numpy as np
import pytest
import torch
from hypothesis import given, settings, strategies as st

from daud.dsra import (
    DSRA, ModelConfig, MutualRelationFusion, Relation, RelationCrossFusion, SequenceEncoder, collate, disentangle,
    dsra_forward, encode_sequence, mutual_relation_fusion, profile_aware_fusion, comment_aware_fusion,
    relation_vector, state_from_json, state_to_json, NewsBundle,
)
from daud.errors import DimensionMismatch, EmptySequence, LengthMismatch

from conftest import random_bundle, tiny_model_config


def _set(linear, weight, bias=None):
    with torch.no_grad():
        linear.weight.copy_(torch.as_tensor(weight, dtype=torch.float64))
        if linear.bias is not None:
            linear.bias.copy_(torch.as_tensor(bias if bias is not None else np.zeros(linear.out_features)))


def _zero(module):
    with torch.no_grad():
        for p in module.parameters():
            p.zero_()


# -- numpy oracles ---------------------------------------------------------------

def np_rel(a, b, wh, bh, wo, bo):
    x = np.concatenate([a, b, a * b, np.abs(a - b)])
    return wo @ np.tanh(wh @ x + bh) + bo


def np_sigmoid(x):
    return 1 / (1 + np.exp(-x))


def np_softmax(x):
    e = np.exp(x - x.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def np_layernorm(x, eps=1e-5):
    mu = x.mean(-1, keepdims=True)
    var = ((x - mu) ** 2).mean(-1, keepdims=True)
    return (x - mu) / np.sqrt(var + eps)


def np_gelu(x):
    return 0.5 * x * (1 + np.vectorize(math.erf)(x / math.sqrt(2)))


# -- disentangler ----------------------------------------------------------------

def test_disentangler_fixture():
    cfg = ModelConfig(d_in=2, d_z=2, heads=1, layers=1, dropout=0.0, n_domains=2)
    model = DSRA(cfg)
    dis = model.disentanglers["news_text"]
    _set(dis.stage1, np.eye(2))
    _set(dis.stage2, [[1, 0], [0, 0]])
    z, logits = disentangle([0.5, -0.5], "news_text", model)
    assert z.detach().numpy() == pytest.approx([math.tanh(math.tanh(0.5)), 0.0], abs=1e-12)
    assert z[0].item() == pytest.approx(0.4319, abs=1e-4)
    assert logits.shape == (2,)


def test_disentangler_zero_input():
    model = DSRA(tiny_model_config())
    for lvl in ("engagement", "comment"):
        dis = model.disentanglers[lvl]
        with torch.no_grad():
            dis.stage1.bias.zero_()
            dis.stage2.bias.zero_()
        z, _ = disentangle(np.zeros(8), lvl, model)
        assert torch.all(z == 0)


def test_disentangler_errors():
    model = DSRA(tiny_model_config())
    with pytest.raises(DimensionMismatch):
        disentangle(np.zeros(3), "news_text", model)
    with pytest.raises(KeyError):
        disentangle(np.zeros(8), "nope", model)


def test_levels_have_independent_parameters():
    model = DSRA(tiny_model_config())
    a = model.disentanglers["news_text"].stage1.weight
    b = model.disentanglers["comment"].stage1.weight
    assert a.data_ptr() != b.data_ptr() and not torch.equal(a, b)


# -- relation --------------------------------------------------------------------

def test_relation_fixture():
    rel = Relation(2)
    wh = np.arange(16, dtype=float).reshape(2, 8) / 10 - 0.7
    bh = np.array([0.1, -0.2])
    wo = np.array([[1.0, -0.5], [0.25, 2.0]])
    bo = np.array([0.05, 0.0])
    _set(rel.hidden, wh, bh)
    _set(rel.out, wo, bo)
    a, b = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    got = relation_vector(a, b, rel).detach().numpy()
    assert got == pytest.approx(np_rel(a, b, wh, bh, wo, bo), abs=1e-12)


def test_relation_zero_weights():
    rel = Relation(3)
    _zero(rel)
    assert torch.all(relation_vector(np.ones(3), np.arange(3.0), rel) == 0)


def test_relation_dims():
    with pytest.raises(DimensionMismatch):
        relation_vector(np.ones(2), np.ones(3), Relation(2))


# -- mutual relation fusion ------------------------------------------------------

def test_mrf_zero_weights_is_concatenation():
    mrf = MutualRelationFusion(4)
    _zero(mrf)
    z_x, z_d = np.array([0.1, -0.3, 0.7, 0.2]), np.array([-1.0, 0.5, 0.0, 0.3])
    out = mutual_relation_fusion(z_x, z_d, mrf)
    assert torch.equal(out, torch.as_tensor(np.concatenate([z_x, z_d])))


def test_mrf_fixture():
    mrf = MutualRelationFusion(2)
    rng = np.random.default_rng(5)
    params = {name: rng.normal(size=p.shape) for name, p in mrf.named_parameters()}
    with torch.no_grad():
        for name, p in mrf.named_parameters():
            p.copy_(torch.as_tensor(params[name]))
    z_x, z_d = np.array([0.3, -0.6]), np.array([0.9, 0.1])
    r = np_rel(z_x, z_d, params["rel.hidden.weight"], params["rel.hidden.bias"], params["rel.out.weight"],
               params["rel.out.bias"])
    q_x = z_x + params["w_x.weight"] @ r
    q_d = z_d + params["w_d.weight"] @ r
    g_x = np_sigmoid(params["gate_x.weight"] @ np.concatenate([q_x, q_d]) + params["gate_x.bias"])
    g_d = np_sigmoid(params["gate_d.weight"] @ np.concatenate([q_d, q_x]) + params["gate_d.bias"])
    want = np.concatenate([q_x + g_x * (params["mix_x.weight"] @ q_d), q_d + g_d * (params["mix_d.weight"] @ q_x)])
    assert mutual_relation_fusion(z_x, z_d, mrf).detach().numpy() == pytest.approx(want, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 6))
def test_zero_weight_neutrality_random(seed, d):
    rng = np.random.default_rng(seed)
    mrf = MutualRelationFusion(d)
    _zero(mrf)
    z_x, z_d = rng.normal(size=d), rng.normal(size=d)
    out = mutual_relation_fusion(z_x, z_d, mrf)
    assert torch.equal(out, torch.as_tensor(np.concatenate([z_x, z_d])))


# -- cross fusions ---------------------------------------------------------------

def _identity_fusion(d, heads=1):
    f = RelationCrossFusion(d, heads)
    _zero(f)
    for lin in (f.attn.q, f.attn.k, f.attn.v, f.attn.o):
        _set(lin, np.eye(d))
    return f


def test_single_element_fusion():
    f = _identity_fusion(3)
    z_e, z_p = np.array([[0.1, 0.2, 0.3]]), np.array([[1.0, -1.0, 0.5]])
    out = profile_aware_fusion(z_e, z_p, f).detach().numpy()
    assert out == pytest.approx(z_e + z_p, abs=1e-15)


def test_length_two_fusion_fixture():
    d = 2
    f = _identity_fusion(d)
    q = np.array([[1.0, 0.0], [0.0, 2.0]])
    ref = np.array([[0.5, 0.5], [-1.0, 1.0]])
    att = np_softmax(q @ ref.T / math.sqrt(d))
    want = q + att @ ref
    got = comment_aware_fusion(q, ref, f).detach().numpy()
    assert got == pytest.approx(want, abs=1e-12)


def test_fusion_errors():
    f = _identity_fusion(2)
    with pytest.raises(EmptySequence):
        profile_aware_fusion(np.ones((1, 2)), np.zeros((0, 2)), f)
    with pytest.raises(LengthMismatch):
        comment_aware_fusion(np.ones((2, 2)), np.ones((1, 2)), f)


# -- sequence encoder ------------------------------------------------------------

def test_zero_layers_returns_token():
    enc = SequenceEncoder(4, heads=2, layers=0, cap=4)
    with torch.no_grad():
        enc.agg_token.copy_(torch.tensor([1.0, 2.0, 3.0, 5.0], dtype=torch.float64))
    a = encode_sequence(np.random.default_rng(0).normal(size=(3, 4)), enc)
    b = encode_sequence(np.ones((1, 4)), enc)
    assert torch.allclose(a, b)
    # position 0 carries sin(0)=0 / cos(0)=1 alternately
    assert a.detach().numpy() == pytest.approx(np_layernorm(np.array([1.0, 3, 3, 6])), abs=1e-12)


def test_encoder_fixture_one_layer():
    d = 2
    enc = SequenceEncoder(d, heads=1, layers=1, cap=4, ffn_mult=1, positional=True)
    rng = np.random.default_rng(11)
    params = {}
    with torch.no_grad():
        for name, p in enc.named_parameters():
            v = rng.normal(size=p.shape) * 0.5
            if "norm" in name:
                v = 1.0 + 0.1 * v if name.endswith("weight") else 0.1 * v
            p.copy_(torch.as_tensor(v))
            params[name] = v
    seq = np.array([[0.3, -0.2], [1.0, 0.4]])

    def P(n):
        return params[n]

    x = np.vstack([P("agg_token"), seq])
    pos = np.arange(3)[:, None]
    i = np.arange(d)[None, :]
    angle = pos / np.power(10000.0, (2 * (i // 2)) / d)
    x = x + np.where(i % 2 == 0, np.sin(angle), np.cos(angle))

    def ln(v, pre):
        return np_layernorm(v) * P(pre + ".weight") + P(pre + ".bias")

    def lin(v, pre):
        return v @ P(pre + ".weight").T + P(pre + ".bias")

    h = ln(x, "layers.0.attn_norm")
    q, k, v = lin(h, "layers.0.attn.q"), lin(h, "layers.0.attn.k"), lin(h, "layers.0.attn.v")
    x = x + lin(np_softmax(q @ k.T / math.sqrt(d)) @ v, "layers.0.attn.o")
    h = ln(x, "layers.0.ffn_norm")
    x = x + lin(np_gelu(lin(h, "layers.0.ffn_in")), "layers.0.ffn_out")
    want = ln(x[0], "final_norm")
    assert encode_sequence(seq, enc).detach().numpy() == pytest.approx(want, abs=1e-10)


def test_encoder_truncates_to_most_recent():
    enc = SequenceEncoder(4, heads=2, layers=1, cap=2)
    seq = np.random.default_rng(1).normal(size=(5, 4))
    assert torch.allclose(encode_sequence(seq, enc), encode_sequence(seq[-2:], enc))


def test_encoder_empty():
    with pytest.raises(EmptySequence):
        encode_sequence(np.zeros((0, 4)), SequenceEncoder(4, 2, 1, 4))


# -- full forward ----------------------------------------------------------------

def test_forward_shapes(rng, tiny_cfg):
    model = DSRA(tiny_cfg).eval()
    rep = dsra_forward(random_bundle(rng, tiny_cfg), model)
    assert rep.z_n.shape == (8,) and rep.z_u.shape == (4,)
    assert len(rep.domain_terms) == 5


def test_no_users_uses_fallback_token(rng, tiny_cfg):
    model = DSRA(tiny_cfg).eval()
    bundle = random_bundle(rng, tiny_cfg, n_users=0)
    rep = dsra_forward(bundle, model)
    assert torch.equal(rep.z_u, model.no_engagement)


def _shuffled(bundle, rng):
    users = [type(u)(u.h_p, [u.engagements[i] for i in p], [u.engagement_domains[i] for i in p])
             for u in bundle.users for p in [rng.permutation(len(u.engagements))]]
    users = [users[i] for i in rng.permutation(len(users))]
    return NewsBundle(bundle.h_x, bundle.h_d, users, bundle.domain, bundle.label)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**6))
def test_permutation_invariance_random(seed):
    rng = np.random.default_rng(seed)
    cfg = tiny_model_config(positional=False)
    model = DSRA(cfg, seed=seed % 7).eval()
    bundle = random_bundle(rng, cfg, n_users=int(rng.integers(1, 4)), n_eng=int(rng.integers(1, 4)))
    a = dsra_forward(bundle, model)
    b = dsra_forward(_shuffled(bundle, rng), model)
    assert torch.allclose(a.z_u, b.z_u, atol=1e-9, rtol=0)
    assert torch.allclose(a.z_n, b.z_n, atol=1e-9, rtol=0)


def test_positional_encoding_breaks_symmetry(rng):
    cfg = tiny_model_config(positional=True)
    model = DSRA(cfg).eval()
    bundle = random_bundle(rng, cfg, n_users=3, n_eng=3)
    rev = NewsBundle(bundle.h_x, bundle.h_d, bundle.users[::-1], bundle.domain, bundle.label)
    assert not torch.allclose(dsra_forward(bundle, model).z_u, dsra_forward(rev, model).z_u)


def test_seeded_init_deterministic(rng, tiny_cfg):
    a, b = DSRA(tiny_cfg, seed=3), DSRA(tiny_cfg, seed=3)
    for (n1, p1), (_, p2) in zip(a.named_parameters(), b.named_parameters()):
        assert torch.equal(p1, p2), n1
    assert not torch.equal(a.mrf.w_x.weight, DSRA(tiny_cfg, seed=4).mrf.w_x.weight)


def test_init_scheme(tiny_cfg):
    model = DSRA(tiny_cfg, seed=0)
    w = model.mrf.gate_x.weight
    assert w.abs().max() <= 1 / math.sqrt(w.shape[1])
    assert torch.all(model.mrf.gate_x.bias == 0)


def test_state_json_round_trip(tiny_cfg, rng):
    a, b = DSRA(tiny_cfg, seed=1).eval(), DSRA(tiny_cfg, seed=2).eval()
    state_from_json(b, state_to_json(a))
    bundle = random_bundle(rng, tiny_cfg)
    assert torch.equal(dsra_forward(bundle, a).z_u, dsra_forward(bundle, b).z_u)


def test_collate_masks_and_caps(rng):
    cfg = tiny_model_config(k_cap=2, m_cap=2)
    bundles = [random_bundle(rng, cfg, n_users=3, n_eng=4), random_bundle(rng, cfg, n_users=1, n_eng=1)]
    batch = collate(bundles, cfg)
    assert batch.h_e.shape == (2, 2, 2, 8)
    assert batch.user_mask.tolist() == [[True, True], [True, False]]
    assert batch.eng_mask[1].tolist() == [[True, False], [False, False]]
    with pytest.raises(EmptySequence):
        collate([], cfg)
    bad = random_bundle(rng, cfg)
    bad.h_x = np.zeros(3)
    with pytest.raises(DimensionMismatch):
        collate([bad], cfg)


def test_config_invariants():
    with pytest.raises(ValueError):
        ModelConfig(d_z=5, heads=2)
    with pytest.raises(ValueError):
        ModelConfig(k_cap=0)
    with pytest.raises(ValueError):
        ModelConfig(dropout=1.0)
