import hashlib
import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from daud.embed import EMPTY_TOKEN, EmbeddingStore, HashingEncoder, cosine, embed_text, make_encoder
from daud.errors import ConfigError, DimensionMismatch


def oracle(text, dim):
    """Independent signed feature hashing."""
    v = [0.0] * dim
    for tok in text.split():
        b = int.from_bytes(hashlib.blake2b(tok.encode(), digest_size=8, person=b"daud-bkt").digest(), "big") % dim
        s = 1.0 if hashlib.blake2b(tok.encode(), digest_size=1, person=b"daud-sgn").digest()[0] & 1 else -1.0
        v[b] += s
    n = math.sqrt(sum(x * x for x in v))
    return [x / n for x in v]


def test_hashing_matches_oracle():
    enc = HashingEncoder(4)
    got = enc.encode(["a a b"])[0]
    assert np.allclose(got, oracle("a a b", 4), atol=1e-12)


def test_unit_norm_and_empty():
    enc = HashingEncoder(16)
    v = enc.encode(["", "hello world"])
    assert np.allclose(np.linalg.norm(v, axis=1), 1.0)
    assert np.allclose(v[0], enc.encode([EMPTY_TOKEN])[0])


def test_whitespace_irrelevant():
    enc = HashingEncoder(32)
    assert np.array_equal(enc.encode(["a  b\tc"]), enc.encode(["a b c"]))


def test_cosine():
    assert cosine(np.array([1.0, 0.0]), np.array([1.0, 1.0])) == pytest.approx(math.sqrt(2) / 2)
    with pytest.raises(DimensionMismatch):
        cosine(np.ones(2), np.ones(3))


def test_embed_text_digest():
    v = embed_text("hi", HashingEncoder(8))
    assert v.dim == 8 and v.source_digest == hashlib.sha256(b"hi").hexdigest()


def test_make_encoder_errors():
    with pytest.raises(ConfigError):
        make_encoder("nope")
    with pytest.raises(ConfigError):
        HashingEncoder(0)


def test_store_memoises_and_round_trips():
    store = EmbeddingStore(HashingEncoder(8))
    a = store.get_many(["x y", "z"])
    buf = io.BytesIO()
    store.save(buf)
    buf.seek(0)
    other = EmbeddingStore(HashingEncoder(8))
    other.load(buf)
    assert np.array_equal(other.get_many(["x y", "z"]), a)


@settings(max_examples=80, deadline=None)
@given(st.lists(st.sampled_from(list("abcdefgh")), min_size=1, max_size=12), st.sampled_from(list("xyz")))
def test_adding_token_touches_only_its_bucket(tokens, extra):
    enc = HashingEncoder(16)
    before = enc.raw(" ".join(tokens))
    after = enc.raw(" ".join(tokens + [extra]))
    changed = np.nonzero(before != after)[0]
    assert len(changed) <= 1
