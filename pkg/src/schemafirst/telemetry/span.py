"""Trace spans carrying schematized payloads keyed by root type fqn."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Optional

from .. import codec
from ..codec import Record
from ..errors import NotFound, UnknownAsset
from .builder import RecordBuilder


@dataclass(frozen=True)
class SpanEnvelope:
    trace_id: bytes
    span_id: bytes
    name: str
    start_us: int
    duration_us: int
    parent_span_id: Optional[bytes] = None
    payloads: dict[str, bytes] = field(default_factory=dict)
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        if len(self.trace_id) != 16:
            raise ValueError("trace_id must be 16 bytes")
        if len(self.span_id) != 8:
            raise ValueError("span_id must be 8 bytes")
        if self.parent_span_id is not None and len(self.parent_span_id) != 8:
            raise ValueError("parent_span_id must be 8 bytes")
        if self.duration_us < 0:
            raise ValueError("duration must not be negative")

    def to_dict(self) -> dict:
        return {
            "trace_id": self.trace_id.hex(),
            "span_id": self.span_id.hex(),
            "parent_span_id": self.parent_span_id.hex() if self.parent_span_id else None,
            "name": self.name,
            "start_us": self.start_us,
            "duration_us": self.duration_us,
            "payloads": {k: v.hex() for k, v in sorted(self.payloads.items())},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> SpanEnvelope:
        d = json.loads(text)
        parent = d.get("parent_span_id")
        return cls(
            trace_id=bytes.fromhex(d["trace_id"]),
            span_id=bytes.fromhex(d["span_id"]),
            name=d["name"],
            start_us=d["start_us"],
            duration_us=d["duration_us"],
            parent_span_id=bytes.fromhex(parent) if parent else None,
            payloads={k: bytes.fromhex(v) for k, v in d["payloads"].items()},
        )


def attach_span_payload(span: SpanEnvelope, builder: RecordBuilder) -> SpanEnvelope:
    """Copy of ``span`` with the builder's payload stored under its root fqn.

    A span holds one payload per fqn; attaching the same fqn again replaces
    the earlier payload and records a warning on the returned span.
    """
    payload = builder.encode()
    key = builder.schema.root
    warnings = ()
    if key in span.payloads:
        warnings = (f"payload {key} replaced",)
    return replace(span, payloads={**span.payloads, key: payload}, warnings=warnings)


def read_span_payload(span: SpanEnvelope, fqn: str, registry) -> Record:
    """Decode the payload stored under ``fqn`` with the schema version it was written at."""
    try:
        payload = span.payloads[fqn]
    except KeyError:
        raise NotFound(f"span {span.name!r} carries no {fqn} payload") from None
    decoded = codec.decode(payload, registry)
    if decoded.asset != fqn:
        raise UnknownAsset(f"payload under {fqn} was written for {decoded.asset}")
    return decoded.record
