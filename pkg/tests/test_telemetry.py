import os

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from schemafirst import codec
from schemafirst.errors import (
    MissingRequiredField,
    NotFound,
    TypeMismatch,
    UnknownAsset,
    UnknownField,
    ValidationFailure,
)
from schemafirst.model import resolve_text
from schemafirst.telemetry import (
    QueueFile,
    QueueReader,
    RecordBuilder,
    SpanEnvelope,
    attach_span_payload,
    emit,
    pipeline_demo,
    read_span_payload,
)
from conftest import publish

COUNTER = "observability.RequestCounter"
RPC = "canopy.core.RPC"


def counter(store, version=None, **values):
    return RecordBuilder.for_asset(store, COUNTER, version).update(**values)


def span(**kw):
    return SpanEnvelope(trace_id=bytes(range(16)), span_id=bytes(8), name="handle", start_us=1, duration_us=5, **kw)


# -- builder -----------------------------------------------------------------------------


def test_builder_set_and_encode(counter_v2):
    b = RecordBuilder(counter_v2, 2).update(service_id="foo", endpoint="bar", status_code=200, shard_id="baz")
    d = codec.decode(b.encode(), counter_v2)
    assert d.version == 2 and d.record == b.record()


def test_builder_rejects_bad_input(counter_v2):
    b = RecordBuilder(counter_v2, 2)
    with pytest.raises(UnknownField):
        b.set("shard", "x")
    with pytest.raises(TypeMismatch):
        b.set("status_code", "200")
    with pytest.raises(TypeMismatch):
        b.set("status_code", 2 ** 40)
    with pytest.raises(UnknownField):
        b.unset("nope")
    assert b.record().fields == {}


def test_builder_validation_and_enums():
    s = resolve_text('namespace e\nenum Level { LOW = 1, HIGH = 2 }\n'
                     'struct R { @Validate{regex="[a-z]+"} 1: string name  2: Level level }', "e.R")
    b = RecordBuilder(s, 1)
    with pytest.raises(ValidationFailure):
        b.set("name", "ABC")
    b.set("name", "abc").set("level", "HIGH")
    assert b.record().fields == {1: "abc", 2: 2}
    with pytest.raises(TypeMismatch):
        b.set("level", "MEDIUM")
    with pytest.raises(ValidationFailure):
        b.set("level", 7)


def test_builder_nested_struct_from_mapping():
    s = resolve_text("namespace e\nstruct I { 1: string v }\nstruct R { 1: list<I> items }", "e.R")
    b = RecordBuilder(s, 1).set("items", [{"v": "a"}, codec.Record("e.I", {1: "b"})])
    assert b.record().fields[1] == [codec.Record("e.I", {1: "a"}), codec.Record("e.I", {1: "b"})]


def test_unset_then_encode_fails(counter_v2):
    b = RecordBuilder(counter_v2, 2).update(service_id="a", endpoint="b", status_code=1, shard_id="c")
    b.unset("endpoint")
    with pytest.raises(MissingRequiredField):
        b.encode()


def test_for_asset_pins_version(store):
    publish(store, "request_counter_v1")
    publish(store, "request_counter")
    assert RecordBuilder.for_asset(store, COUNTER).version == 2
    old = RecordBuilder.for_asset(store, COUNTER, 1)
    with pytest.raises(UnknownField):
        old.set("shard_id", "x")


# -- queue ------------------------------------------------------------------------------


def test_emit_appends_one_frame(tmp_path, store):
    publish(store, "request_counter")
    q = QueueFile(tmp_path / "q")
    payload = emit(counter(store, service_id="a", endpoint="b", status_code=1, shard_id="c"), q)
    assert q.frames() == [payload]
    assert len(q) == 1


def test_emit_failure_leaves_queue_untouched(tmp_path, store):
    publish(store, "request_counter")
    q = QueueFile(tmp_path / "q")
    emit(counter(store, service_id="a", endpoint="b", status_code=1, shard_id="c"), q)
    before = (tmp_path / "q").read_bytes()
    with pytest.raises(MissingRequiredField):
        emit(counter(store, service_id="a"), q)
    assert (tmp_path / "q").read_bytes() == before


def test_identical_records_identical_frames(tmp_path, store):
    publish(store, "request_counter")
    q = QueueFile(tmp_path / "q")
    values = dict(service_id="a", endpoint="b", status_code=1, shard_id="c")
    emit(counter(store, **values), q)
    emit(counter(store, **dict(reversed(list(values.items())))), q)
    a, b = q.frames()
    assert a == b


def test_reader_skips_partial_frame(tmp_path):
    path = tmp_path / "q"
    q = QueueFile(path)
    q.append(b"first")
    with open(path, "ab") as fh:
        fh.write(bytes([9]) + b"half")
    reader = QueueReader(path)
    assert reader.poll() == [b"first"]
    assert reader.poll() == []
    with open(path, "ab") as fh:
        fh.write(b"-done")
    assert reader.poll() == [b"half-done"]
    assert reader.position == os.path.getsize(path)


def test_queue_reopen_keeps_frames(tmp_path):
    QueueFile(tmp_path / "q").append(b"a")
    q = QueueFile(tmp_path / "q")
    assert q.append(b"bb") == 2
    assert q.frames() == [b"a", b"bb"]


@settings(max_examples=50)
@given(st.lists(st.binary(max_size=300), max_size=20), st.data())
def test_queue_frames_round_trip_under_split_writes(tmp_path_factory, frames, data):
    path = tmp_path_factory.mktemp("q") / "q"
    blob = b"".join(codec.uleb128(len(f)) + f for f in frames)
    cuts = sorted(data.draw(st.lists(st.integers(0, len(blob)), max_size=5)))
    path.write_bytes(b"")
    reader = QueueReader(path)
    got = []
    prev = 0
    for cut in cuts + [len(blob)]:
        with open(path, "ab") as fh:
            fh.write(blob[prev:cut])
        prev = cut
        got += reader.poll()
    assert got == frames


# -- spans -------------------------------------------------------------------------------


def test_span_carries_two_payloads(store):
    publish(store, "request_counter")
    publish(store, "rpc")
    s = attach_span_payload(span(), counter(store, service_id="a", endpoint="b", status_code=1, shard_id="c"))
    s = attach_span_payload(s, RecordBuilder.for_asset(store, RPC).update(source_service="a", target_service="b"))
    assert sorted(s.payloads) == [RPC, COUNTER]
    assert s.warnings == ()
    assert read_span_payload(s, COUNTER, store).fields[2] == "b"
    assert read_span_payload(s, RPC, store).fields[2] == "b"
    back = SpanEnvelope.from_json(s.to_json())
    assert back == s


def test_span_reattach_replaces_with_warning(store):
    publish(store, "request_counter")
    s = attach_span_payload(span(), counter(store, service_id="a", endpoint="b", status_code=1, shard_id="c"))
    s2 = attach_span_payload(s, counter(store, service_id="z", endpoint="b", status_code=1, shard_id="c"))
    assert len(s2.payloads) == 1 and s2.warnings
    assert read_span_payload(s2, COUNTER, store).fields[1] == "z"
    assert read_span_payload(s, COUNTER, store).fields[1] == "a"


def test_span_payload_read_after_schema_evolves(store):
    publish(store, "request_counter_v1")
    s = attach_span_payload(span(), counter(store, service_id="a", endpoint="b", status_code=1))
    publish(store, "request_counter")
    rec = read_span_payload(s, COUNTER, store)
    assert rec.fields == {1: "a", 2: "b", 3: 1}


def test_span_payload_errors(store):
    publish(store, "request_counter")
    with pytest.raises(NotFound):
        read_span_payload(span(), COUNTER, store)
    payload = counter(store, service_id="a", endpoint="b", status_code=1, shard_id="c").encode()
    with pytest.raises(UnknownAsset):
        read_span_payload(span(payloads={RPC: payload}), RPC, store)


@pytest.mark.parametrize("kw", [dict(trace_id=b"x"), dict(span_id=b"x"), dict(duration_us=-1)])
def test_span_envelope_checks(kw):
    base = dict(trace_id=bytes(16), span_id=bytes(8), name="n", start_us=0, duration_us=0)
    with pytest.raises(ValueError):
        SpanEnvelope(**{**base, **kw})


# -- pipeline ----------------------------------------------------------------------------


def test_pipeline_two_producers(store, tmp_path):
    report = pipeline_demo(2, 100, store, workdir=tmp_path / "work")
    assert report.emitted == report.decoded == 200
    assert report.failures == [] and report.pinned_failures == []
    assert report.published_version == 2
    assert report.per_asset == {COUNTER: 100, RPC: 100}
    assert report.per_version == {f"{COUNTER}@1": 50, f"{COUNTER}@2": 50, f"{RPC}@1": 100}
    assert report.skipped_fields == {f"{COUNTER}#4": 50}
    assert report.mean_binary_bytes < report.mean_json_bytes
    assert report.size_ratio < 1
    assert "decoded" in report.format()


def test_pipeline_deterministic_content(tmp_path):
    from schemafirst.registry import SchemaStore
    a = pipeline_demo(1, 20, SchemaStore(tmp_path / "a"), workdir=tmp_path / "wa", seed=3)
    b = pipeline_demo(1, 20, SchemaStore(tmp_path / "b"), workdir=tmp_path / "wb", seed=3)
    assert (tmp_path / "wa" / "producer-0.queue").read_bytes() == (tmp_path / "wb" / "producer-0.queue").read_bytes()
    assert a.to_dict()["size"] == b.to_dict()["size"]


def test_pipeline_empty(store):
    report = pipeline_demo(0, 0, store)
    assert report.emitted == report.decoded == 0
    assert report.failures == []
    assert report.size_ratio is None
