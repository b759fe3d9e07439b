"""Self-describing binary wire format for telemetry records.

Layout::

    payload := 'S' 'F' 0x01 uleb(len(asset)) asset uleb(version) field*
    field   := uleb(id) wire_type value
    value   := bool: 1 byte | i32/i64: uleb(zigzag) | double: 8 bytes LE
             | bytes/text: uleb(len) raw | record: uleb(len) field*
             | list: elem_type uleb(count) value*
             | map: key_type value_type uleb(count) (key value)*

Fields are written in ascending id order, so encoding is deterministic.
Enums travel as wire type 1.  Decoders skip ids they do not know using
the wire type alone.
"""

from __future__ import annotations

import math
import re
import struct
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, NamedTuple, Optional, Union

from .errors import (
    BadMagic,
    MissingRequiredField,
    TruncatedPayload,
    TypeMismatch,
    UnknownAsset,
    UnknownField,
    UnknownVersion,
    ValidationFailure,
    WireTypeMismatch,
)
from .idl import TypeExpr
from .model import CompositeDef, EnumDef, ResolvedSchema

MAGIC = b"SF"
FORMAT_VERSION = 1

WT_BOOL, WT_I32, WT_I64, WT_DOUBLE, WT_BYTES, WT_RECORD, WT_LIST, WT_MAP = range(8)
_PRIMITIVE_WT = {"bool": WT_BOOL, "i32": WT_I32, "i64": WT_I64, "double": WT_DOUBLE,
                 "string": WT_BYTES, "binary": WT_BYTES}

I32_MIN, I32_MAX = -(1 << 31), (1 << 31) - 1
I64_MIN, I64_MAX = -(1 << 63), (1 << 63) - 1
_DOUBLE = struct.Struct("<d")


@dataclass
class Record:
    """A decoded (or to-be-encoded) struct value: field id -> value.

    Scalars are plain Python values (``bool``, ``int``, ``float``, ``str``,
    ``bytes``); enums are their integer value; lists are ``list`` and maps
    are ``dict``; nested structs are :class:`Record`.
    """

    type_fqn: str
    fields: dict[int, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class Violation:
    path: str
    rule: str
    detail: str

    def __str__(self) -> str:
        return f"{self.path}: {self.rule} ({self.detail})"


class Decoded(NamedTuple):
    record: Record
    asset: str
    version: int
    skipped_ids: list[int]
    skipped_nested: list[tuple[str, int]] = []


# -- varints -----------------------------------------------------------------


def uleb128(n: int) -> bytes:
    if n < 0:
        raise ValueError("uleb128 of negative number")
    out = bytearray()
    while True:
        b = n & 0x7F
        n >>= 7
        if n:
            out.append(b | 0x80)
        else:
            out.append(b)
            return bytes(out)


def read_uleb128(buf: bytes, pos: int, end: Optional[int] = None) -> tuple[int, int]:
    end = len(buf) if end is None else end
    result = shift = 0
    while True:
        if pos >= end:
            raise TruncatedPayload(f"varint runs past byte {end}")
        b = buf[pos]
        pos += 1
        result |= (b & 0x7F) << shift
        if not b & 0x80:
            return result, pos
        shift += 7
        if shift > 70:
            raise WireTypeMismatch("varint longer than 10 bytes")


def zigzag(n: int, bits: int = 64) -> int:
    return ((n << 1) ^ (n >> (bits - 1))) & ((1 << bits) - 1)


def unzigzag(z: int) -> int:
    return (z >> 1) ^ -(z & 1)


# -- encoding ----------------------------------------------------------------


def wire_type(schema: ResolvedSchema, t: TypeExpr) -> int:
    w = schema.wire_type(t)
    if w.name in _PRIMITIVE_WT and not w.args:
        return _PRIMITIVE_WT[w.name]
    if w.name == "list":
        return WT_LIST
    if w.name == "map":
        return WT_MAP
    td = schema.type(w.name)
    return WT_I32 if isinstance(td, EnumDef) else WT_RECORD


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _encode_value(value: Any, t: TypeExpr, schema: ResolvedSchema, path: str) -> bytes:
    w = schema.wire_type(t)
    name = w.name
    if name == "bool":
        if not isinstance(value, bool):
            raise TypeMismatch(f"{path}: expected bool, got {type(value).__name__}")
        return b"\x01" if value else b"\x00"
    if name in ("i32", "i64"):
        lo, hi = (I32_MIN, I32_MAX) if name == "i32" else (I64_MIN, I64_MAX)
        if not _is_int(value) or not lo <= value <= hi:
            raise TypeMismatch(f"{path}: expected {name}, got {value!r}")
        return uleb128(zigzag(value, 32 if name == "i32" else 64))
    if name == "double":
        if not (_is_int(value) or isinstance(value, float)):
            raise TypeMismatch(f"{path}: expected double, got {type(value).__name__}")
        return _DOUBLE.pack(float(value))
    if name == "string":
        if not isinstance(value, str):
            raise TypeMismatch(f"{path}: expected string, got {type(value).__name__}")
        raw = value.encode("utf-8")
        return uleb128(len(raw)) + raw
    if name == "binary":
        if not isinstance(value, (bytes, bytearray)):
            raise TypeMismatch(f"{path}: expected binary, got {type(value).__name__}")
        return uleb128(len(value)) + bytes(value)
    if name == "list":
        if not isinstance(value, (list, tuple)):
            raise TypeMismatch(f"{path}: expected list, got {type(value).__name__}")
        elem = w.args[0]
        parts = [bytes([wire_type(schema, elem)]), uleb128(len(value))]
        parts += [_encode_value(v, elem, schema, f"{path}[{i}]") for i, v in enumerate(value)]
        return b"".join(parts)
    if name == "map":
        if not isinstance(value, Mapping):
            raise TypeMismatch(f"{path}: expected map, got {type(value).__name__}")
        kt, vt = w.args
        pairs = sorted(
            (_encode_value(k, kt, schema, f"{path}{{key}}"), _encode_value(v, vt, schema, f"{path}[{k!r}]"))
            for k, v in value.items()
        )
        head = bytes([wire_type(schema, kt), wire_type(schema, vt)]) + uleb128(len(pairs))
        return head + b"".join(k + v for k, v in pairs)
    td = schema.type(name)
    if isinstance(td, EnumDef):
        if not _is_int(value) or not I32_MIN <= value <= I32_MAX:
            raise TypeMismatch(f"{path}: expected {name} enum value, got {value!r}")
        return uleb128(zigzag(value, 32))
    if not isinstance(value, Record) or value.type_fqn != td.fqn:
        got = value.type_fqn if isinstance(value, Record) else type(value).__name__
        raise TypeMismatch(f"{path}: expected {td.fqn} record, got {got}")
    body = _encode_fields(value, td, schema, path + ".")
    return uleb128(len(body)) + body


def _encode_fields(record: Record, comp: CompositeDef, schema: ResolvedSchema, prefix: str) -> bytes:
    by_id = {f.id: f for f in comp.fields}
    for fid in record.fields:
        if fid not in by_id:
            raise TypeMismatch(f"{prefix}{fid}: {comp.fqn} has no field with id {fid}")
    out = bytearray()
    for f in sorted(comp.fields, key=lambda f: f.id):
        value = record.fields.get(f.id)
        if value is None:
            if not f.optional:
                raise MissingRequiredField(f"{prefix}{f.name}: required field of {comp.fqn} is missing")
            continue
        out += uleb128(f.id)
        out.append(wire_type(schema, f.type))
        out += _encode_value(value, f.type, schema, prefix + f.name)
    return bytes(out)


def encode_header(asset: str, version: int) -> bytes:
    raw = asset.encode("utf-8")
    return MAGIC + bytes([FORMAT_VERSION]) + uleb128(len(raw)) + raw + uleb128(version)


def encode(record: Record, schema: ResolvedSchema, version: int) -> bytes:
    """Encode ``record`` (an instance of ``schema.root``) as a payload."""
    if not isinstance(record, Record) or record.type_fqn != schema.root:
        got = record.type_fqn if isinstance(record, Record) else type(record).__name__
        raise TypeMismatch(f"expected {schema.root} record, got {got}")
    if version < 1:
        raise ValueError("version must be positive")
    body = _encode_fields(record, schema.root_def, schema, "")
    violations = validate_value(record, schema)
    if violations:
        raise ValidationFailure(violations)
    return encode_header(schema.root, version) + body


# -- decoding ----------------------------------------------------------------


class _Reader:
    def __init__(self, buf: bytes, schema: ResolvedSchema):
        self.buf = buf
        self.schema = schema
        self.skipped_nested: list[tuple[str, int]] = []

    def take(self, pos: int, n: int, end: int) -> tuple[bytes, int]:
        if pos + n > end:
            raise TruncatedPayload(f"need {n} bytes at offset {pos}, only {end - pos} left")
        return self.buf[pos:pos + n], pos + n

    def skip(self, wt: int, pos: int, end: int) -> int:
        if wt == WT_BOOL:
            return self.take(pos, 1, end)[1]
        if wt in (WT_I32, WT_I64):
            return read_uleb128(self.buf, pos, end)[1]
        if wt == WT_DOUBLE:
            return self.take(pos, 8, end)[1]
        if wt in (WT_BYTES, WT_RECORD):
            n, pos = read_uleb128(self.buf, pos, end)
            return self.take(pos, n, end)[1]
        if wt == WT_LIST:
            ewt, pos = self.take(pos, 1, end)
            count, pos = read_uleb128(self.buf, pos, end)
            for _ in range(count):
                pos = self.skip(ewt[0], pos, end)
            return pos
        if wt == WT_MAP:
            kv, pos = self.take(pos, 2, end)
            count, pos = read_uleb128(self.buf, pos, end)
            for _ in range(count):
                pos = self.skip(kv[0], pos, end)
                pos = self.skip(kv[1], pos, end)
            return pos
        raise WireTypeMismatch(f"unknown wire type {wt} at offset {pos - 1}")

    def fields(self, comp: CompositeDef, pos: int, end: int, skipped: Optional[list]) -> Record:
        by_id = {f.id: f for f in comp.fields}
        record = Record(comp.fqn)
        while pos < end:
            fid, pos = read_uleb128(self.buf, pos, end)
            wt_b, pos = self.take(pos, 1, end)
            wt = wt_b[0]
            f = by_id.get(fid)
            if f is None:
                pos = self.skip(wt, pos, end)
                if skipped is not None:
                    skipped.append(fid)
                else:
                    self.skipped_nested.append((comp.fqn, fid))
                continue
            if fid in record.fields:
                raise WireTypeMismatch(f"field {comp.fqn}.{f.name} appears twice")
            expected = wire_type(self.schema, f.type)
            if wt != expected:
                raise WireTypeMismatch(f"field {comp.fqn}.{f.name}: wire type {wt}, schema expects {expected}")
            record.fields[fid], pos = self.value(f.type, pos, end)
        return record

    def value(self, t: TypeExpr, pos: int, end: int) -> tuple[Any, int]:
        w = self.schema.wire_type(t)
        name = w.name
        if name == "bool":
            b, pos = self.take(pos, 1, end)
            if b[0] > 1:
                raise WireTypeMismatch(f"bool byte {b[0]} at offset {pos - 1}")
            return b[0] == 1, pos
        if name in ("i32", "i64"):
            z, pos = read_uleb128(self.buf, pos, end)
            v = unzigzag(z)
            lo, hi = (I32_MIN, I32_MAX) if name == "i32" else (I64_MIN, I64_MAX)
            if not lo <= v <= hi:
                raise WireTypeMismatch(f"{name} value {v} out of range")
            return v, pos
        if name == "double":
            raw, pos = self.take(pos, 8, end)
            return _DOUBLE.unpack(raw)[0], pos
        if name in ("string", "binary"):
            n, pos = read_uleb128(self.buf, pos, end)
            raw, pos = self.take(pos, n, end)
            if name == "binary":
                return bytes(raw), pos
            try:
                return raw.decode("utf-8"), pos
            except UnicodeDecodeError as exc:
                raise WireTypeMismatch(f"invalid UTF-8 in string: {exc}") from None
        if name == "list":
            elem = w.args[0]
            ewt, pos = self.take(pos, 1, end)
            if ewt[0] != wire_type(self.schema, elem):
                raise WireTypeMismatch(f"list element wire type {ewt[0]} does not match {elem}")
            count, pos = read_uleb128(self.buf, pos, end)
            out = []
            for _ in range(count):
                v, pos = self.value(elem, pos, end)
                out.append(v)
            return out, pos
        if name == "map":
            kt, vt = w.args
            kv, pos = self.take(pos, 2, end)
            if (kv[0], kv[1]) != (wire_type(self.schema, kt), wire_type(self.schema, vt)):
                raise WireTypeMismatch(f"map wire types {tuple(kv)} do not match {w}")
            count, pos = read_uleb128(self.buf, pos, end)
            out = {}
            for _ in range(count):
                k, pos = self.value(kt, pos, end)
                out[k], pos = self.value(vt, pos, end)
            return out, pos
        td = self.schema.type(name)
        if isinstance(td, EnumDef):
            z, pos = read_uleb128(self.buf, pos, end)
            return unzigzag(z), pos
        n, pos = read_uleb128(self.buf, pos, end)
        if pos + n > end:
            raise TruncatedPayload(f"nested {td.fqn} of {n} bytes overruns its container")
        return self.fields(td, pos, pos + n, None), pos + n


SchemaSource = Union[ResolvedSchema, Callable[[str, int], ResolvedSchema], Any]


def read_header(payload: bytes) -> tuple[str, int, int]:
    """Return ``(asset, version, body offset)``."""
    if len(payload) < 2:
        raise TruncatedPayload("payload shorter than magic")
    if payload[:2] != MAGIC:
        raise BadMagic(f"bad magic {payload[:2].hex()}")
    if len(payload) < 3:
        raise TruncatedPayload("payload ends before format byte")
    if payload[2] != FORMAT_VERSION:
        raise BadMagic(f"unsupported format byte {payload[2]:#04x}")
    n, pos = read_uleb128(payload, 3)
    if pos + n > len(payload):
        raise TruncatedPayload("asset name runs past end of payload")
    try:
        asset = payload[pos:pos + n].decode("utf-8")
    except UnicodeDecodeError:
        raise WireTypeMismatch("asset name is not UTF-8") from None
    version, pos = read_uleb128(payload, pos + n)
    return asset, version, pos


def _lookup(source: SchemaSource, asset: str, version: int) -> ResolvedSchema:
    if isinstance(source, ResolvedSchema):
        if source.root != asset:
            raise UnknownAsset(f"payload is {asset}, schema is {source.root}")
        return source
    if hasattr(source, "schema_for"):
        return source.schema_for(asset, version)
    if callable(source):
        return source(asset, version)
    if isinstance(source, Mapping):
        if asset not in {a for a, _ in source}:
            raise UnknownAsset(asset)
        if (asset, version) not in source:
            raise UnknownVersion(f"{asset}@{version}")
        return source[(asset, version)]
    raise TypeError(f"unusable schema source {source!r}")


def decode(payload: bytes, schema_source: SchemaSource) -> Decoded:
    """Decode ``payload`` using an explicit schema or a ``(asset, version)`` lookup.

    An explicit schema may be of a different version than the payload; ids
    it does not know are skipped and listed in ``skipped_ids``.
    """
    payload = bytes(payload)
    asset, version, pos = read_header(payload)
    schema = _lookup(schema_source, asset, version)
    reader = _Reader(payload, schema)
    skipped: list[int] = []
    record = reader.fields(schema.root_def, pos, len(payload), skipped)
    return Decoded(record, asset, version, skipped, reader.skipped_nested)


# -- validation --------------------------------------------------------------


def validate_value(record: Record, schema: ResolvedSchema) -> list[Violation]:
    """Rule violations in ``record``: regex mismatch, undeclared enum value,
    nonfinite value in a unit-bearing field."""
    out: list[Violation] = []
    _validate_record(record, schema.composite(record.type_fqn), schema, "", out)
    return out


def _validate_record(record: Record, comp: CompositeDef, schema: ResolvedSchema, prefix: str, out: list):
    for f in comp.fields:
        value = record.fields.get(f.id)
        if value is None:
            continue
        path = prefix + f.name
        if f.validate_regex is not None and isinstance(value, str):
            if re.fullmatch(f.validate_regex, value) is None:
                out.append(Violation(path, "regex", f"{value!r} does not match {f.validate_regex!r}"))
        if f.unit is not None and isinstance(value, float) and not math.isfinite(value):
            out.append(Violation(path, "nonfinite", f"{value!r} in field measured in {f.unit}"))
        _validate_nested(value, f.type, schema, path, out)


def _validate_nested(value, t: TypeExpr, schema: ResolvedSchema, path: str, out: list):
    w = schema.wire_type(t)
    if w.name == "list" and isinstance(value, (list, tuple)):
        for i, v in enumerate(value):
            _validate_nested(v, w.args[0], schema, f"{path}[{i}]", out)
        return
    if w.name == "map" and isinstance(value, Mapping):
        for k, v in value.items():
            _validate_nested(k, w.args[0], schema, f"{path}{{{k!r}}}", out)
            _validate_nested(v, w.args[1], schema, f"{path}[{k!r}]", out)
        return
    td = schema.types.get(w.name)
    if isinstance(td, EnumDef) and _is_int(value) and td.name_of(value) is None:
        declared = ", ".join(str(v) for _, v in td.values)
        out.append(Violation(path, "enum", f"{value} is not a value of {td.fqn} ({declared})"))
    elif isinstance(td, CompositeDef) and isinstance(value, Record):
        _validate_record(value, td, schema, path + ".", out)


# -- name-keyed and JSON forms ------------------------------------------------


def to_named(record: Record, schema: ResolvedSchema, json_safe: bool = False) -> dict:
    """Field-name keyed view of ``record``.

    With ``json_safe`` bytes become lowercase hex, enums their symbolic
    name, and maps with non-string keys a list of ``[key, value]`` pairs.
    """
    comp = schema.composite(record.type_fqn)
    out = {}
    for f in comp.fields:
        if f.id in record.fields and record.fields[f.id] is not None:
            out[f.name] = _named_value(record.fields[f.id], f.type, schema, json_safe)
    return out


def _named_value(value, t: TypeExpr, schema: ResolvedSchema, json_safe: bool):
    w = schema.wire_type(t)
    if w.name == "binary" and json_safe:
        return bytes(value).hex()
    if w.name == "list":
        return [_named_value(v, w.args[0], schema, json_safe) for v in value]
    if w.name == "map":
        kt, vt = w.args
        items = [(_named_value(k, kt, schema, json_safe), _named_value(v, vt, schema, json_safe))
                 for k, v in value.items()]
        if json_safe and schema.wire_type(kt).name != "string":
            return [[k, v] for k, v in items]
        return dict(items)
    td = schema.types.get(w.name)
    if isinstance(td, EnumDef):
        return (td.name_of(value) or value) if json_safe else value
    if isinstance(td, CompositeDef):
        return to_named(value, schema, json_safe)
    return value


def from_named(data: Mapping[str, Any], schema: ResolvedSchema, type_fqn: Optional[str] = None,
               json_safe: bool = False) -> Record:
    """Inverse of :func:`to_named`; enums may be given by name or number."""
    comp = schema.composite(type_fqn or schema.root)
    rec = Record(comp.fqn)
    for name, value in data.items():
        f = comp.field_named(name)
        if f is None:
            raise UnknownField(f"{comp.fqn} has no field {name!r}")
        if value is not None:
            rec.fields[f.id] = coerce(value, f.type, schema, f"{comp.fqn}.{name}", json_safe)
    return rec


def coerce(value, t: TypeExpr, schema: ResolvedSchema, path: str, json_safe: bool = False):
    """Convert a user-supplied value toward the codec's native representation."""
    w = schema.wire_type(t)
    if w.name == "binary" and json_safe and isinstance(value, str):
        try:
            return bytes.fromhex(value)
        except ValueError:
            raise TypeMismatch(f"{path}: expected lowercase hex bytes") from None
    if w.name == "double" and _is_int(value):
        return float(value)
    if w.name == "list" and isinstance(value, (list, tuple)):
        return [coerce(v, w.args[0], schema, f"{path}[{i}]", json_safe) for i, v in enumerate(value)]
    if w.name == "map":
        kt, vt = w.args
        if json_safe and isinstance(value, list):
            items = value
        elif isinstance(value, Mapping):
            items = list(value.items())
        else:
            raise TypeMismatch(f"{path}: expected map")
        return {coerce(k, kt, schema, path, json_safe): coerce(v, vt, schema, f"{path}[{k!r}]", json_safe)
                for k, v in items}
    td = schema.types.get(w.name)
    if isinstance(td, EnumDef) and isinstance(value, str):
        number = td.number_of(value)
        if number is None:
            raise TypeMismatch(f"{path}: {value!r} is not a value of {td.fqn}")
        return number
    if isinstance(td, CompositeDef) and isinstance(value, Mapping):
        return from_named(value, schema, td.fqn, json_safe)
    return value


def check_value(value, t: TypeExpr, schema: ResolvedSchema, path: str) -> None:
    """Raise :class:`TypeMismatch` unless ``value`` encodes as type ``t``."""
    _encode_value(value, t, schema, path)
