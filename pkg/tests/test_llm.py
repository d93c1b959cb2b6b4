import json

import pytest

from daud.errors import CacheCorrupt, MalformedResponse, NoRuleForKind
from daud.llm import ChatRequest, MockBackend, PromptKind, ResponseCache, cached_complete, complete
from daud.mock import MockRuleTable, default_rules


def req(text="hello", kind=PromptKind.PROFILE_INIT):
    return ChatRequest(kind, "sys", text)


def test_digest_stable_and_sensitive():
    assert req().digest == req().digest
    assert req().digest != req("hello!").digest
    assert req().digest != ChatRequest(PromptKind.PROFILE_INIT, "sys", "hello", temperature=0.5).digest


def test_request_validation():
    with pytest.raises(ValueError):
        ChatRequest(PromptKind.NFE, "s", "")
    with pytest.raises(ValueError):
        ChatRequest(PromptKind.NFE, "s", "x", schema_id="profile")


def test_canonical_round_trip():
    r = req()
    assert ChatRequest.from_canonical(r.canonical()) == r


def test_cache_hit_skips_backend(tmp_path):
    backend = MockBackend(MockRuleTable({"ProfileInit": {"canned": "hi"}}))
    cache = ResponseCache(tmp_path)
    first = cached_complete(req(), backend, cache)
    second = cached_complete(req(), backend, cache)
    assert backend.calls == 1
    assert (first.cached, second.cached) == (False, True)
    assert first.text == second.text == "hi"
    assert len(cache) == 1


def test_cache_is_write_once(tmp_path):
    cache = ResponseCache(tmp_path)
    r = req()
    cached_complete(r, MockBackend({"ProfileInit": {"canned": "one"}}), cache)
    cached_complete(r, MockBackend({"ProfileInit": {"canned": "two"}}), ResponseCache(tmp_path))
    assert cache.get(r).text == "one"


def test_cache_corruption_detected(tmp_path):
    cache = ResponseCache(tmp_path)
    r = req()
    cached_complete(r, MockBackend({"ProfileInit": {"canned": "x"}}), cache)
    path = cache.path_for(r.digest)
    doc = json.loads(path.read_text())
    doc["response"]["text"] = "tampered"
    path.write_text(json.dumps(doc))
    with pytest.raises(CacheCorrupt):
        cache.get(r)


def test_no_rule_for_kind():
    with pytest.raises(NoRuleForKind):
        complete(req(), MockBackend({}))


def test_non_text_response():
    class Bad:
        name = "bad"

        def generate(self, r):
            return 3

    with pytest.raises(MalformedResponse):
        complete(req(), Bad())


def test_default_rules_cover_every_kind():
    table = default_rules()
    for kind in PromptKind:
        assert table.rule(kind) is not None


def test_rule_table_round_trip(tmp_path):
    table = default_rules()
    table.save(tmp_path / "r.json")
    assert MockRuleTable.load(tmp_path / "r.json").to_json() == table.to_json()
