"""Exception hierarchy.

Every error maps onto one CLI exit code through its ``exit_code`` attribute.
"""
from __future__ import annotations


class DaudError(Exception):
    exit_code = 1


class ConfigError(DaudError):
    exit_code = 2


class DataError(DaudError):
    exit_code = 3


class BackendError(DaudError):
    exit_code = 4


class InvariantViolation(DaudError, AssertionError):
    exit_code = 5


# data-model
class MissingField(DataError):
    def __init__(self, record: int | str, field: str):
        self.record = record
        self.field = field
        super().__init__(f"record {record}: missing field {field!r}")


class DanglingReference(DataError):
    def __init__(self, news_id: str):
        self.news_id = news_id
        super().__init__(f"engagement references unknown news id {news_id!r}")


class UnknownLabel(DataError):
    def __init__(self, value):
        self.value = value
        super().__init__(f"unknown veracity label {value!r}")


class UnknownDomain(DataError):
    def __init__(self, domain: str):
        self.domain = domain
        super().__init__(f"unknown domain {domain!r}")


class EmptyClass(DataError):
    def __init__(self, domain: str, label: str):
        self.domain = domain
        self.label = label
        super().__init__(f"domain {domain!r} has no items labelled {label!r}")


class LeakageError(InvariantViolation):
    pass


# llm-gateway
class BackendUnavailable(BackendError):
    pass


class MalformedResponse(BackendError):
    pass


class CacheCorrupt(BackendError):
    def __init__(self, digest: str):
        self.digest = digest
        super().__init__(f"cache record {digest} failed its checksum")


class NoRuleForKind(BackendError):
    pass


# text-embedder / dsra-core
class EncoderUnavailable(BackendError):
    pass


class DimensionMismatch(ValueError, DaudError):
    pass


class LengthMismatch(ValueError, DaudError):
    pass


class EmptySequence(ValueError, DaudError):
    pass


class EmptyInput(ValueError, DaudError):
    pass


# ldae
class ParseError(BackendError):
    pass


class MissingBlock(ParseError):
    pass


class MissingOutputField(ParseError):
    def __init__(self, name: str):
        self.field = name
        super().__init__(f"structured block lacks field {name!r}")


class UnparseableDecision(ParseError):
    pass


class EmptyArticle(DataError):
    pass


class NoComments(DataError):
    pass


class NoHistory(DataError):
    pass


# detector
class NonFiniteLoss(DaudError):
    def __init__(self, step: int, dump_path: str | None = None):
        self.step = step
        self.dump_path = dump_path
        super().__init__(f"non-finite loss at step {step}" + (f" (state dumped to {dump_path})" if dump_path else ""))


class InvalidEpsilon(ValueError, DaudError):
    pass


class InsufficientDomains(DataError):
    pass
