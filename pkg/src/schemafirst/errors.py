"""Exception hierarchy shared by every layer of the package."""

from __future__ import annotations

from typing import TYPE_CHECKING, Any, Iterable

if TYPE_CHECKING:
    from .compat import Verdict
    from .idl.ast import SourcePos


class SchemaFirstError(Exception):
    """Base class for all errors raised by this package."""


# -- IDL ---------------------------------------------------------------------


class IdlError(SchemaFirstError):
    def __init__(self, message: str, pos: SourcePos):
        self.message = message
        self.pos = pos
        super().__init__(f"{pos}: {message}")


class LexError(IdlError):
    pass


class ParseError(IdlError):
    def __init__(self, message: str, pos: SourcePos, expected: Iterable[str] = ()):
        self.expected = frozenset(expected)
        if self.expected:
            message = f"{message} (expected one of: {', '.join(sorted(self.expected))})"
        super().__init__(message, pos)


# -- schema resolution -------------------------------------------------------


class SchemaError(SchemaFirstError):
    pass


class UnresolvedName(SchemaError):
    pass


class CycleDetected(SchemaError):
    pass


class DuplicateFieldAfterFlatten(SchemaError):
    pass


class ConflictingAnnotation(SchemaError):
    pass


class InvalidAnnotation(SchemaError):
    pass


class InvalidType(SchemaError):
    pass


# -- compatibility -----------------------------------------------------------


class CompatError(SchemaFirstError):
    pass


class RootMismatch(CompatError):
    pass


class BreakingNotTransformable(CompatError):
    pass


class TransformGap(CompatError):
    pass


# -- registry ----------------------------------------------------------------


class RegistryError(SchemaFirstError):
    pass


class NotFound(RegistryError, LookupError):
    pass


class InvalidDocument(RegistryError):
    pass


class ConcurrentModification(RegistryError):
    pass


class BreakingRejected(RegistryError):
    def __init__(self, verdict: Verdict):
        self.verdict = verdict
        breaking = [r.change.kind.value for r in verdict.rulings if r.ruling == "breaking"]
        super().__init__(f"breaking change rejected: {', '.join(breaking)}")


class CorruptStore(RegistryError):
    pass


# -- codec -------------------------------------------------------------------


class CodecError(SchemaFirstError):
    pass


class TypeMismatch(CodecError, TypeError):
    pass


class MissingRequiredField(CodecError):
    pass


class ValidationFailure(CodecError, ValueError):
    def __init__(self, violations: list[Any]):
        self.violations = violations
        super().__init__("; ".join(str(v) for v in violations))


class BadMagic(CodecError):
    pass


class UnknownAsset(CodecError, NotFound):
    pass


class UnknownVersion(CodecError, NotFound):
    pass


class TruncatedPayload(CodecError):
    pass


class WireTypeMismatch(CodecError):
    pass


# -- telemetry ---------------------------------------------------------------


class UnknownField(SchemaFirstError, KeyError):
    def __str__(self) -> str:
        return str(self.args[0]) if self.args else ""


# -- semantic queries --------------------------------------------------------


class SemanticQueryError(SchemaFirstError):
    pass


class ConversionUnavailable(SemanticQueryError):
    pass


class AmbiguousField(SemanticQueryError):
    pass


class NotShared(SemanticQueryError):
    pass
