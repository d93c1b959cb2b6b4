"""Domain-shared representation learning with relation-aware alignment.

Batched torch implementation (float64). Padding is expressed with boolean
masks; masked keys get a large finite negative score so rows with at least
one valid key are bit-identical to their unpadded computation.

Shapes: B news per batch, M users per news, K engagements per user.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
import torch
from torch import nn

from .errors import DimensionMismatch, EmptySequence, LengthMismatch

LEVELS = ("news_text", "news_summary", "user_profile", "engagement", "comment")
DTYPE = torch.float64
_MASKED = -1e9


@dataclass
class ModelConfig:
    d_in: int = 768
    d_z: int = 128
    heads: int = 4
    layers: int = 2
    dropout: float = 0.1
    k_cap: int = 32
    m_cap: int = 32
    lambda_dom: float = 0.1
    n_domains: int = 3
    positional: bool = True
    ffn_mult: int = 2

    def __post_init__(self):
        if self.d_z % self.heads:
            raise ValueError(f"d_z={self.d_z} is not divisible by heads={self.heads}")
        if self.k_cap < 1 or self.m_cap < 1:
            raise ValueError("sequence caps must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        if self.n_domains < 1:
            raise ValueError("n_domains must be >= 1")

    def to_json(self) -> dict:
        return asdict(self)


class _GradReverse(torch.autograd.Function):
    @staticmethod
    def forward(ctx, x, sign):
        ctx.sign = sign
        return x.view_as(x)

    @staticmethod
    def backward(ctx, grad):
        return ctx.sign * grad, None


def grad_reverse(x: torch.Tensor, enabled: bool = True) -> torch.Tensor:
    """Identity forward; negates the gradient on the way back when enabled."""
    return _GradReverse.apply(x, -1.0 if enabled else 1.0)


def linear(d_in: int, d_out: int, bias: bool = True) -> nn.Linear:
    return nn.Linear(d_in, d_out, bias=bias, dtype=DTYPE)


def reset_parameters(module: nn.Module, seed: int) -> None:
    """uniform(+-1/sqrt(fan_in)) weights, zero biases, unit LayerNorm gains."""
    gen = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for name, p in module.named_parameters():
            leaf = name.rsplit(".", 1)[-1]
            if ".norm" in name or name.startswith("norm") or "_norm" in name:
                p.fill_(1.0 if leaf == "weight" else 0.0)
            elif leaf == "bias":
                p.zero_()
            else:
                fan_in = p.shape[-1] if p.dim() > 1 else p.shape[0]
                bound = 1.0 / math.sqrt(fan_in)
                p.copy_(torch.rand(p.shape, generator=gen, dtype=DTYPE) * 2 * bound - bound)


# -- building blocks -----------------------------------------------------------

class Disentangler(nn.Module):
    """Veracity-relevant extractor followed by a domain-shared extractor."""

    def __init__(self, d_in: int, d_z: int, n_domains: int, dropout: float = 0.0):
        super().__init__()
        self.stage1 = linear(d_in, d_z)
        self.stage2 = linear(d_z, d_z)
        self.domain_head = linear(d_z, n_domains)
        self.drop = nn.Dropout(dropout)
        self.reverse = True

    def forward(self, h):
        z = torch.tanh(self.stage2(self.drop(torch.tanh(self.stage1(h)))))
        return z, self.domain_head(grad_reverse(z, self.reverse))


class Relation(nn.Module):
    """Rel(a, b) = mlp([a, b, a*b, |a-b|]) with one tanh hidden layer."""

    def __init__(self, d: int):
        super().__init__()
        self.hidden = linear(4 * d, d)
        self.out = linear(d, d)

    def forward(self, a, b):
        return self.out(torch.tanh(self.hidden(torch.cat([a, b, a * b, (a - b).abs()], dim=-1))))


class MultiHeadAttention(nn.Module):
    def __init__(self, d: int, heads: int, dropout: float = 0.0):
        super().__init__()
        self.heads = heads
        self.q = linear(d, d)
        self.k = linear(d, d)
        self.v = linear(d, d)
        self.o = linear(d, d)
        self.drop = nn.Dropout(dropout)

    def forward(self, query, keys, key_mask=None):
        *lead, lq, d = query.shape
        lk = keys.shape[-2]
        dh = d // self.heads
        q = self.q(query).reshape(*lead, lq, self.heads, dh).transpose(-2, -3)
        k = self.k(keys).reshape(*lead, lk, self.heads, dh).transpose(-2, -3)
        v = self.v(keys).reshape(*lead, lk, self.heads, dh).transpose(-2, -3)
        scores = q @ k.transpose(-1, -2) / math.sqrt(dh)
        if key_mask is not None:
            scores = scores.masked_fill(~key_mask[..., None, None, :], _MASKED)
        attn = self.drop(torch.softmax(scores, dim=-1))
        out = (attn @ v).transpose(-2, -3).reshape(*lead, lq, d)
        return self.o(out)


class MutualRelationFusion(nn.Module):
    """Relation-injected, bi-directional gated cross-mixing of two news vectors."""

    def __init__(self, d: int):
        super().__init__()
        self.rel = Relation(d)
        self.w_x = linear(d, d, bias=False)
        self.w_d = linear(d, d, bias=False)
        self.gate_x = linear(2 * d, d)
        self.gate_d = linear(2 * d, d)
        self.mix_x = linear(d, d, bias=False)
        self.mix_d = linear(d, d, bias=False)

    def forward(self, z_x, z_d):
        r = self.rel(z_x, z_d)
        q_x = z_x + self.w_x(r)
        q_d = z_d + self.w_d(r)
        out_x = q_x + torch.sigmoid(self.gate_x(torch.cat([q_x, q_d], -1))) * self.mix_x(q_d)
        out_d = q_d + torch.sigmoid(self.gate_d(torch.cat([q_d, q_x], -1))) * self.mix_d(q_x)
        return torch.cat([out_x, out_d], dim=-1)


class RelationCrossFusion(nn.Module):
    """Cross-attention with a positionwise relation injected into the queries.

    Used twice: profile-aware (queries = user behaviour, reference = profiles)
    and comment-aware (queries = engagements, reference = comments).
    """

    def __init__(self, d: int, heads: int, dropout: float = 0.0):
        super().__init__()
        self.rel = Relation(d)
        self.inject = linear(d, d, bias=False)
        self.attn = MultiHeadAttention(d, heads, dropout)

    def forward(self, queries, reference, mask=None):
        q = queries + self.inject(self.rel(queries, reference))
        return q + self.attn(q, reference, mask)


def sinusoidal(length: int, d: int) -> torch.Tensor:
    pos = torch.arange(length, dtype=DTYPE)[:, None]
    i = torch.arange(d, dtype=DTYPE)[None, :]
    angle = pos / torch.pow(torch.tensor(10000.0, dtype=DTYPE), (2 * (i // 2)) / d)
    return torch.where(i % 2 == 0, torch.sin(angle), torch.cos(angle))


class EncoderLayer(nn.Module):
    def __init__(self, d: int, heads: int, ffn_mult: int, dropout: float):
        super().__init__()
        self.attn_norm = nn.LayerNorm(d, dtype=DTYPE)
        self.attn = MultiHeadAttention(d, heads, dropout)
        self.ffn_norm = nn.LayerNorm(d, dtype=DTYPE)
        self.ffn_in = linear(d, ffn_mult * d)
        self.ffn_out = linear(ffn_mult * d, d)
        self.drop = nn.Dropout(dropout)

    def forward(self, x, mask):
        h = self.attn_norm(x)
        x = x + self.drop(self.attn(h, h, mask))
        h = self.ffn_norm(x)
        return x + self.drop(self.ffn_out(nn.functional.gelu(self.ffn_in(h))))


class SequenceEncoder(nn.Module):
    """Pre-norm Transformer encoder read out at a learned aggregation token."""

    def __init__(self, d: int, heads: int, layers: int, cap: int, ffn_mult: int = 2,
                 dropout: float = 0.0, positional: bool = True):
        super().__init__()
        self.cap = cap
        self.positional = positional
        self.agg_token = nn.Parameter(torch.zeros(d, dtype=DTYPE))
        self.layers = nn.ModuleList(EncoderLayer(d, heads, ffn_mult, dropout) for _ in range(layers))
        self.final_norm = nn.LayerNorm(d, dtype=DTYPE)
        self.register_buffer("pe", sinusoidal(cap + 1, d), persistent=False)

    def forward(self, seq, mask):
        n, length, d = seq.shape
        tok = self.agg_token.expand(n, 1, d)
        x = torch.cat([tok, seq], dim=1)
        full = torch.cat([torch.ones(n, 1, dtype=torch.bool), mask], dim=1)
        if self.positional:
            x = x + self.pe[: length + 1]
        for layer in self.layers:
            x = layer(x, full)
        return self.final_norm(x[:, 0])


# -- batches -------------------------------------------------------------------

@dataclass
class UserBundle:
    h_p: np.ndarray
    engagements: list[tuple[np.ndarray, np.ndarray]]
    engagement_domains: list[int] = field(default_factory=list)


@dataclass
class NewsBundle:
    """Per-news model input; users and engagements arrive in the order the encoders read them."""

    h_x: np.ndarray
    h_d: np.ndarray
    users: list[UserBundle]
    domain: int = 0
    label: float | None = None
    news_id: str = ""


@dataclass
class Batch:
    h_x: torch.Tensor
    h_d: torch.Tensor
    h_p: torch.Tensor
    user_mask: torch.Tensor
    h_e: torch.Tensor
    h_c: torch.Tensor
    eng_mask: torch.Tensor
    news_domain: torch.Tensor
    eng_domain: torch.Tensor
    y: torch.Tensor | None = None

    def __len__(self):
        return self.h_x.shape[0]


def collate(bundles: list[NewsBundle], cfg: ModelConfig) -> Batch:
    """Pad bundles to a batch; keeps the first ``m_cap`` users and each user's latest ``k_cap`` engagements."""
    if not bundles:
        raise EmptySequence("cannot collate an empty list of bundles")
    b = len(bundles)
    m = max(1, min(cfg.m_cap, max(len(x.users) for x in bundles)))
    k = max(1, min(cfg.k_cap, max((len(u.engagements) for x in bundles for u in x.users), default=1)))
    d = cfg.d_in
    h_x = np.zeros((b, d))
    h_d = np.zeros((b, d))
    h_p = np.zeros((b, m, d))
    h_e = np.zeros((b, m, k, d))
    h_c = np.zeros((b, m, k, d))
    user_mask = np.zeros((b, m), dtype=bool)
    eng_mask = np.zeros((b, m, k), dtype=bool)
    news_domain = np.zeros(b, dtype=np.int64)
    eng_domain = np.zeros((b, m, k), dtype=np.int64)
    y = np.zeros(b)
    for i, nb in enumerate(bundles):
        for name, vec in (("h_x", nb.h_x), ("h_d", nb.h_d)):
            if np.shape(vec) != (d,):
                raise DimensionMismatch(f"{name} has shape {np.shape(vec)}, expected ({d},)")
        h_x[i], h_d[i] = nb.h_x, nb.h_d
        news_domain[i] = nb.domain
        y[i] = np.nan if nb.label is None else nb.label
        for j, ub in enumerate(nb.users[:m]):
            engs = ub.engagements[-k:]
            doms = (ub.engagement_domains or [nb.domain] * len(ub.engagements))[-k:]
            if not engs:
                continue
            user_mask[i, j] = True
            h_p[i, j] = ub.h_p
            for t, ((e, c), dom) in enumerate(zip(engs, doms)):
                h_e[i, j, t], h_c[i, j, t] = e, c
                eng_mask[i, j, t] = True
                eng_domain[i, j, t] = dom
    t = lambda a: torch.as_tensor(a, dtype=DTYPE)  # noqa: E731
    return Batch(t(h_x), t(h_d), t(h_p), torch.as_tensor(user_mask), t(h_e), t(h_c),
                 torch.as_tensor(eng_mask), torch.as_tensor(news_domain), torch.as_tensor(eng_domain), t(y))


@dataclass
class DomainTerm:
    logits: torch.Tensor
    labels: torch.Tensor


@dataclass
class Representations:
    z_n: torch.Tensor
    z_u: torch.Tensor
    domain_terms: list[DomainTerm] = field(default_factory=list)


# -- the network ---------------------------------------------------------------

class DSRA(nn.Module):
    def __init__(self, cfg: ModelConfig, seed: int = 0):
        super().__init__()
        self.cfg = cfg
        self.seed = seed
        d = cfg.d_z
        self.disentanglers = nn.ModuleDict(
            {lvl: Disentangler(cfg.d_in, d, cfg.n_domains, cfg.dropout) for lvl in LEVELS})
        self.mrf = MutualRelationFusion(d)
        self.profile_fusion = RelationCrossFusion(d, cfg.heads, cfg.dropout)
        self.comment_fusion = RelationCrossFusion(d, cfg.heads, cfg.dropout)
        self.engagement_encoder = SequenceEncoder(d, cfg.heads, cfg.layers, cfg.k_cap, cfg.ffn_mult,
                                                  cfg.dropout, cfg.positional)
        self.user_encoder = SequenceEncoder(d, cfg.heads, cfg.layers, cfg.m_cap, cfg.ffn_mult,
                                            cfg.dropout, cfg.positional)
        self.no_engagement = nn.Parameter(torch.zeros(d, dtype=DTYPE))
        reset_parameters(self, seed)

    @property
    def out_dims(self) -> tuple[int, int]:
        return 2 * self.cfg.d_z, self.cfg.d_z

    def set_gradient_reversal(self, enabled: bool) -> None:
        for dis in self.disentanglers.values():
            dis.reverse = enabled

    def forward(self, batch: Batch) -> Representations:
        dis = self.disentanglers
        b, m, k, _ = batch.h_e.shape
        z_x, l_x = dis["news_text"](batch.h_x)
        z_d, l_d = dis["news_summary"](batch.h_d)
        z_p, l_p = dis["user_profile"](batch.h_p)
        z_e, l_e = dis["engagement"](batch.h_e)
        z_c, l_c = dis["comment"](batch.h_c)

        # engagement level: per user, comments as reference
        flat_mask = batch.eng_mask.reshape(b * m, k)
        fused = self.comment_fusion(z_e.reshape(b * m, k, -1), z_c.reshape(b * m, k, -1), flat_mask)
        z_user_beh = self.engagement_encoder(fused, flat_mask).reshape(b, m, -1)

        # user level: per news, profiles as reference
        fused_u = self.profile_fusion(z_user_beh, z_p, batch.user_mask)
        z_u = self.user_encoder(fused_u, batch.user_mask)
        has_users = batch.user_mask.any(dim=1, keepdim=True)
        z_u = torch.where(has_users, z_u, self.no_engagement.expand_as(z_u))

        z_n = self.mrf(z_x, z_d)
        user_dom = batch.news_domain[:, None].expand(b, m)
        terms = [
            DomainTerm(l_x, batch.news_domain),
            DomainTerm(l_d, batch.news_domain),
            DomainTerm(l_p[batch.user_mask], user_dom[batch.user_mask]),
            DomainTerm(l_e[batch.eng_mask], batch.eng_domain[batch.eng_mask]),
            DomainTerm(l_c[batch.eng_mask], batch.eng_domain[batch.eng_mask]),
        ]
        return Representations(z_n, z_u, terms)


class ConcatEncoder(nn.Module):
    """Ablation without DSRA: raw embeddings concatenated, users and engagements mean-pooled."""

    def __init__(self, cfg: ModelConfig, seed: int = 0):
        super().__init__()
        self.cfg = cfg
        self.seed = seed

    @property
    def out_dims(self) -> tuple[int, int]:
        return 2 * self.cfg.d_in, 3 * self.cfg.d_in

    def set_gradient_reversal(self, enabled: bool) -> None:
        pass

    def forward(self, batch: Batch) -> Representations:
        def mean(x, mask):
            w = mask.to(DTYPE)
            dims = tuple(range(1, mask.dim()))
            total = (x * w[..., None]).sum(dim=dims)
            return total / w.sum(dim=dims).clamp(min=1.0)[:, None]

        z_n = torch.cat([batch.h_x, batch.h_d], dim=-1)
        z_u = torch.cat([mean(batch.h_p, batch.user_mask), mean(batch.h_e, batch.eng_mask),
                         mean(batch.h_c, batch.eng_mask)], dim=-1)
        return Representations(z_n, z_u, [])


# -- single-instance functional API ----------------------------------------------

def _vec(x, d: int, name: str) -> torch.Tensor:
    t = torch.as_tensor(np.asarray(x, dtype=float), dtype=DTYPE)
    if t.shape[-1] != d:
        raise DimensionMismatch(f"{name} has trailing dimension {t.shape[-1]}, expected {d}")
    return t


def _seq(x, d: int, name: str) -> torch.Tensor:
    t = torch.as_tensor(np.asarray(x, dtype=float).reshape(-1, d) if len(x) else np.zeros((0, d)), dtype=DTYPE)
    return t


def disentangle(h, level: str, model: DSRA):
    if level not in model.disentanglers:
        raise KeyError(f"no disentangler for level {level!r}")
    z, logits = model.disentanglers[level](_vec(h, model.cfg.d_in, "h"))
    return z, logits


def relation_vector(a, b, rel: Relation) -> torch.Tensor:
    d = rel.out.out_features
    a, b = _vec(a, d, "a"), _vec(b, d, "b")
    return rel(a, b)


def mutual_relation_fusion(z_x, z_d, mrf: MutualRelationFusion) -> torch.Tensor:
    d = mrf.w_x.in_features
    return mrf(_vec(z_x, d, "z_x"), _vec(z_d, d, "z_d"))


def _fusion(queries, reference, fusion: RelationCrossFusion) -> torch.Tensor:
    d = fusion.inject.in_features
    if len(queries) == 0 or len(reference) == 0:
        raise EmptySequence("fusion needs non-empty query and reference sequences")
    if len(queries) != len(reference):
        raise LengthMismatch(f"{len(queries)} queries vs {len(reference)} references")
    q, r = _seq(queries, d, "queries"), _seq(reference, d, "reference")
    return fusion(q[None], r[None])[0]


def profile_aware_fusion(z_e_users, z_p, fusion: RelationCrossFusion) -> torch.Tensor:
    return _fusion(z_e_users, z_p, fusion)


def comment_aware_fusion(z_e, z_c, fusion: RelationCrossFusion) -> torch.Tensor:
    return _fusion(z_e, z_c, fusion)


def encode_sequence(seq, stack: str | SequenceEncoder, model: DSRA | None = None) -> torch.Tensor:
    enc = stack if isinstance(stack, SequenceEncoder) else {
        "engagement": model.engagement_encoder, "user": model.user_encoder}[stack]
    d = enc.agg_token.shape[0]
    if len(seq) == 0:
        raise EmptySequence("cannot encode an empty sequence")
    s = _seq(seq, d, "seq")[-enc.cap:]
    return enc(s[None], torch.ones(1, s.shape[0], dtype=torch.bool))[0]


def dsra_forward(bundle: NewsBundle, model: DSRA) -> Representations:
    batch = collate([bundle], model.cfg)
    out = model(batch)
    return Representations(out.z_n[0], out.z_u[0], out.domain_terms)


# -- serialization -------------------------------------------------------------

def state_to_json(module: nn.Module) -> dict[str, list]:
    return {name: t.detach().cpu().numpy().tolist() for name, t in module.state_dict().items()}


def state_from_json(module: nn.Module, tensors: dict[str, list]) -> None:
    state = {name: torch.as_tensor(np.asarray(v, dtype=float), dtype=DTYPE) for name, v in tensors.items()}
    module.load_state_dict(state)
