import json
import math
import re

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from schemafirst import codec
from schemafirst.codec import (
    I32_MAX,
    I32_MIN,
    I64_MAX,
    I64_MIN,
    Record,
    decode,
    encode,
    read_uleb128,
    uleb128,
    unzigzag,
    validate_value,
    zigzag,
)
from schemafirst.errors import (
    BadMagic,
    CodecError,
    MissingRequiredField,
    TruncatedPayload,
    TypeMismatch,
    UnknownAsset,
    UnknownVersion,
    ValidationFailure,
    WireTypeMismatch,
)
from schemafirst.model import resolve_text
from conftest import DATA
from strategies import records_for, schema_and_record, schema_texts

COUNTER_RECORD = {"service_id": "foo", "endpoint": "bar", "status_code": 200, "shard_id": "baz"}


def golden_bytes():
    text = (DATA / "counter_v2_payload.hex").read_text()
    return bytes.fromhex(" ".join(re.sub(r"#.*", "", line) for line in text.splitlines()))


# -- golden payload -----------------------------------------------------------------


def test_counter_golden(counter_v2):
    payload = encode(codec.from_named(COUNTER_RECORD, counter_v2), counter_v2, 2)
    assert payload == golden_bytes()


def test_counter_golden_decodes(counter_v2):
    d = decode(golden_bytes(), counter_v2)
    assert (d.asset, d.version, d.skipped_ids) == ("observability.RequestCounter", 2, [])
    assert codec.to_named(d.record, counter_v2) == COUNTER_RECORD


# -- varints ----------------------------------------------------------------------------


@pytest.mark.parametrize("n, encoded", [(0, "00"), (1, "01"), (127, "7f"), (128, "8001"), (300, "ac02"),
                                        (2 ** 64 - 1, "ffffffffffffffffff01")])
def test_uleb128_vectors(n, encoded):
    assert uleb128(n).hex() == encoded
    assert read_uleb128(bytes.fromhex(encoded), 0) == (n, len(encoded) // 2)


@pytest.mark.parametrize("n, z", [(0, 0), (-1, 1), (1, 2), (-2, 3), (I32_MAX, 2 ** 32 - 2), (I32_MIN, 2 ** 32 - 1)])
def test_zigzag32_vectors(n, z):
    assert zigzag(n, 32) == z and unzigzag(z) == n


@pytest.mark.parametrize("n", [I64_MIN, -1, 0, 1, I64_MAX])
def test_zigzag64_boundaries(n):
    z = zigzag(n, 64)
    assert 0 <= z < 2 ** 64 and unzigzag(z) == n
    assert read_uleb128(uleb128(z), 0)[0] == z


@given(st.integers(I32_MIN, I32_MAX))
def test_zigzag32_round_trip(n):
    assert unzigzag(zigzag(n, 32)) == n
    assert zigzag(n, 32) == zigzag(n, 64)


def test_truncated_varint():
    with pytest.raises(TruncatedPayload):
        read_uleb128(b"\x80\x80", 0)


# -- encode ---------------------------------------------------------------------------


def test_empty_record_all_optional():
    s = resolve_text("namespace e\nstruct R { 1: optional i32 a  2: optional string b }", "e.R")
    payload = encode(Record("e.R"), s, 1)
    assert payload == b"SF\x01\x03e.R\x01"


def test_status_code_as_text(counter_v2):
    with pytest.raises(TypeMismatch):
        encode(codec.from_named({**COUNTER_RECORD, "status_code": "200"}, counter_v2), counter_v2, 2)


def test_missing_required(counter_v2):
    rec = codec.from_named({k: v for k, v in COUNTER_RECORD.items() if k != "endpoint"}, counter_v2)
    with pytest.raises(MissingRequiredField):
        encode(rec, counter_v2, 2)


@pytest.mark.parametrize("ftype, value", [
    ("i32", True), ("i32", 2 ** 31), ("i64", -(2 ** 63) - 1), ("double", "1.0"), ("bool", 1),
    ("string", b"x"), ("binary", "x"), ("list<i32>", {1}), ("map<string, i32>", [("a", 1)]),
])
def test_type_mismatches(ftype, value):
    s = resolve_text(f"namespace e\nstruct R {{ 1: {ftype} v }}", "e.R")
    with pytest.raises(TypeMismatch):
        encode(Record("e.R", {1: value}), s, 1)


def test_undeclared_field_id_rejected(counter_v1):
    with pytest.raises(TypeMismatch):
        encode(Record(counter_v1.root, {1: "a", 2: "b", 3: 1, 9: "x"}), counter_v1, 1)


def test_double_accepts_int():
    s = resolve_text("namespace e\nstruct R { 1: double v }", "e.R")
    assert decode(encode(Record("e.R", {1: 3}), s, 1), s).record.fields[1] == 3.0


def test_regex_validation_on_encode():
    s = resolve_text('namespace e\nstruct R { @Validate{regex="[a-z]+"} 1: string v }', "e.R")
    encode(Record("e.R", {1: "abc"}), s, 1)
    with pytest.raises(ValidationFailure) as info:
        encode(Record("e.R", {1: "ABC"}), s, 1)
    (v,) = info.value.violations
    assert (v.path, v.rule) == ("v", "regex")


def test_map_entries_sorted_by_key_bytes():
    s = resolve_text("namespace e\nstruct R { 1: map<string, i32> m }", "e.R")
    a = encode(Record("e.R", {1: {"b": 1, "a": 2}}), s, 1)
    b = encode(Record("e.R", {1: {"a": 2, "b": 1}}), s, 1)
    assert a == b
    assert a.endswith(bytes.fromhex("0107 04 01 02 0161 04 0162 02"))


# -- validate_value -----------------------------------------------------------------------


def test_validate_regex_match_and_mismatch():
    s = resolve_text('namespace e\nstruct R { @Validate{regex="[a-z]+"} 1: string v }', "e.R")
    assert validate_value(Record("e.R", {1: "abc"}), s) == []
    assert len(validate_value(Record("e.R", {1: "ABC"}), s)) == 1
    assert len(validate_value(Record("e.R", {1: "abc1"}), s)) == 1  # full match, not search


def test_validate_actor_enum(rpc_schema):
    actor = "canopy.core.OneWayMsgExchangeActor"
    assert validate_value(Record(actor, {1: 2}), rpc_schema) == []
    (v,) = validate_value(Record(actor, {1: 3}), rpc_schema)
    assert (v.path, v.rule) == ("value", "enum")


def test_validate_nonfinite_unit_field():
    s = resolve_text('namespace e\n@Unit{"ms"} typedef double Ms\nstruct R { 1: Ms a  2: double b }', "e.R")
    (v,) = validate_value(Record("e.R", {1: math.inf, 2: math.nan}), s)
    assert (v.path, v.rule) == ("a", "nonfinite")


def test_validate_nested_paths():
    s = resolve_text('namespace e\nstruct I { @Validate{regex="x"} 1: string v }\n'
                     'struct R { 1: list<I> items }', "e.R")
    (v,) = validate_value(Record("e.R", {1: [Record("e.I", {1: "x"}), Record("e.I", {1: "y"})]}), s)
    assert v.path == "items[1].v"


# -- decode ---------------------------------------------------------------------------------


def test_v2_payload_with_v1_schema(counter_v1, counter_v2):
    payload = encode(codec.from_named(COUNTER_RECORD, counter_v2), counter_v2, 2)
    d = decode(payload, counter_v1)
    assert d.skipped_ids == [4]
    assert codec.to_named(d.record, counter_v1) == {k: v for k, v in COUNTER_RECORD.items() if k != "shard_id"}


def test_bad_magic(counter_v2):
    with pytest.raises(BadMagic):
        decode(b"\x00\x00" + golden_bytes()[2:], counter_v2)


def test_bad_format_byte(counter_v2):
    with pytest.raises(BadMagic):
        decode(b"SF\x02" + golden_bytes()[3:], counter_v2)


def test_asset_mismatch_with_explicit_schema(rpc_schema):
    with pytest.raises(UnknownAsset):
        decode(golden_bytes(), rpc_schema)


def test_mapping_lookup(counter_v2):
    source = {("observability.RequestCounter", 2): counter_v2}
    assert decode(golden_bytes(), source).version == 2
    with pytest.raises(UnknownVersion):
        decode(golden_bytes(), {("observability.RequestCounter", 1): counter_v2})
    with pytest.raises(UnknownAsset):
        decode(golden_bytes(), {("x.Y", 2): counter_v2})


def test_truncated_mid_field(counter_v2):
    with pytest.raises(TruncatedPayload):
        decode(golden_bytes()[:-2], counter_v2)


def test_every_prefix_fails_cleanly_or_loses_whole_fields(counter_v2):
    full = golden_bytes()
    whole = decode(full, counter_v2).record.fields
    for n in range(len(full)):
        try:
            got = decode(full[:n], counter_v2).record.fields
        except CodecError:
            continue
        assert all(whole[k] == v for k, v in got.items())


def test_wire_type_mismatch(counter_v2):
    bad = codec.encode_header(counter_v2.root, 2) + bytes.fromhex("03 04 01 41")
    with pytest.raises(WireTypeMismatch):
        decode(bad, counter_v2)


def test_unknown_wire_type_in_skipped_field(counter_v1):
    bad = codec.encode_header(counter_v1.root, 1) + bytes.fromhex("09 0e 00")
    with pytest.raises(WireTypeMismatch):
        decode(bad, counter_v1)


def test_invalid_utf8(counter_v2):
    bad = codec.encode_header(counter_v2.root, 2) + bytes.fromhex("02 04 02 c3 28")
    with pytest.raises(WireTypeMismatch):
        decode(bad, counter_v2)


def test_nested_overrun():
    s = resolve_text("namespace e\nstruct I { 1: string v }\nstruct R { 1: I i }", "e.R")
    bad = codec.encode_header("e.R", 1) + bytes.fromhex("01 05 04 01 04 05 61")
    with pytest.raises(TruncatedPayload):
        decode(bad, s)


def test_skipped_nested_reported():
    old = resolve_text("namespace e\nstruct I { 1: string v }\nstruct R { 1: I i }", "e.R")
    new = resolve_text("namespace e\nstruct I { 1: string v  2: optional i64 w }\nstruct R { 1: I i }", "e.R")
    payload = encode(Record("e.R", {1: Record("e.I", {1: "a", 2: 7})}), new, 2)
    d = decode(payload, old)
    assert d.skipped_ids == [] and d.skipped_nested == [("e.I", 2)]
    assert d.record == Record("e.R", {1: Record("e.I", {1: "a"})})


# -- properties --------------------------------------------------------------------------------


@settings(max_examples=1000)
@given(schema_and_record())
def test_round_trip(pair):
    schema, record = pair
    payload = encode(record, schema, 1)
    d = decode(payload, schema)
    assert d.record == record and d.skipped_ids == []
    assert payload[:2] == b"SF"


@settings(max_examples=200)
@given(st.data())
def test_encoding_ignores_field_order(data):
    schema, record = data.draw(schema_and_record())
    order = data.draw(st.permutations(list(record.fields)))
    shuffled = Record(record.type_fqn, {k: record.fields[k] for k in order})
    assert encode(shuffled, schema, 3) == encode(record, schema, 3)


@st.composite
def extended_schemas(draw):
    """(S1, S2, added ids) where S2 adds optional root fields to S1."""
    text = draw(schema_texts())
    s1 = resolve_text(text, "gen.Root")
    used = {f.id for f in s1.root_def.fields}
    extra_ids = draw(st.lists(st.integers(1, 3000).filter(lambda i: i not in used), min_size=1, max_size=3,
                              unique=True))
    types = st.sampled_from(["i32", "i64", "double", "string", "binary", "bool", "Inner", "list<string>",
                             "map<i64, Inner>", "list<list<i32>>"])
    lines = "".join(f"  {fid}: optional {draw(types)} added{fid}\n" for fid in extra_ids)
    head, tail = text.rsplit("}", 1)
    s2 = resolve_text(head + lines + "}" + tail, "gen.Root")
    return s1, s2, extra_ids


@settings(max_examples=300)
@given(st.data())
def test_skip_safety(data):
    s1, s2, added = data.draw(extended_schemas())
    record = data.draw(records_for(s2))
    d = decode(encode(record, s2, 2), s1)
    expected = {k: v for k, v in record.fields.items() if k not in added}
    assert d.record.fields == expected
    assert d.skipped_ids == sorted(k for k in record.fields if k in added)


@settings(max_examples=200)
@given(schema_and_record())
def test_json_form_round_trip(pair):
    schema, record = pair
    named = json.loads(json.dumps(codec.to_named(record, schema, json_safe=True)))
    assert codec.from_named(named, schema, json_safe=True) == record


@settings(max_examples=100)
@given(st.data())
def test_decode_never_crashes_on_garbage(data):
    schema, record = data.draw(schema_and_record())
    payload = bytearray(encode(record, schema, 1))
    header = len(codec.encode_header(schema.root, 1))
    if len(payload) > header:
        i = data.draw(st.integers(header, len(payload) - 1))
        payload[i] = data.draw(st.integers(0, 255))
    try:
        decode(bytes(payload), schema)
    except CodecError:
        pass

