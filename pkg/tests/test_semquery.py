from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from schemafirst import codec
from schemafirst.codec import Record
from schemafirst.errors import AmbiguousField, ConversionUnavailable, NotShared, SemanticQueryError
from schemafirst.listings import listing_schema
from schemafirst.model import Qualifier
from schemafirst.semquery import (
    CrossFilter,
    Dataset,
    SemanticIndex,
    build_index,
    convert,
    cross_filter,
    semantic_join,
    shared_dimensions,
)
from conftest import publish

HOST = "InfraEnum.DataCenter_Host"
SERVICE = "InfraEnum.Service"
SHORT, FQDN = "infra.HostName", "infra.HostNameWithFQDN"
RESOURCE, EVENT, NAMES = "infra.resource.HostResource", "infra.events.HostEvent", "infra.HostNames"
RPC, LOG = "canopy.core.RPC", "canopy.logs.ServiceLog"

SCHEMAS = {n: listing_schema(n) for n in ("host_resource_typed", "host_events", "hosts", "rpc", "service_log")}
INDEX = SemanticIndex.from_schemas(SCHEMAS.values())


# -- index ---------------------------------------------------------------------------


def test_empty_index():
    idx = SemanticIndex.from_schemas([])
    assert idx.semids() == [] and idx.fields(HOST) == []
    assert shared_dimensions(RESOURCE, EVENT, idx) == []


def test_index_entries():
    assert INDEX.semids() == [HOST, SERVICE]
    assert [(e.asset, e.path, e.rich_type) for e in INDEX.fields(HOST)] == [
        (NAMES, "host", SHORT),
        (NAMES, "host_fqdn", FQDN),
        (EVENT, "host", FQDN),
        (RESOURCE, "name", SHORT),
    ]
    (src,) = [e for e in INDEX.fields(SERVICE, RPC) if e.path == "source_service"]
    assert src.qualifiers == (Qualifier("canopy.core.OneWayMsgExchangeActor", "SOURCE"),)


def test_untyped_listing_has_no_dimensions():
    idx = SemanticIndex.from_schemas([listing_schema("host_resource"), SCHEMAS["host_events"]])
    assert shared_dimensions(RESOURCE, EVENT, idx) == []


def test_build_index_from_registry(store):
    for name in ("host_resource_typed", "host_events", "rpc"):
        publish(store, name)
    idx = build_index(store)
    assert shared_dimensions(RESOURCE, EVENT, idx) == [HOST]
    assert shared_dimensions(RESOURCE, RPC, idx) == []
    assert idx.to_dict()[SERVICE][0]["qualifiers"] == ["canopy.core.OneWayMsgExchangeActor=SOURCE"]


def test_shared_dimensions():
    assert shared_dimensions(RPC, LOG, INDEX) == [SERVICE]
    assert shared_dimensions(NAMES, EVENT, INDEX) == [HOST]


# -- conversion ---------------------------------------------------------------------------


def test_conversions():
    assert convert("devvm123.zone1.example.com", FQDN, SHORT, INDEX) == "devvm123"
    assert convert("devvm123", SHORT, SHORT, INDEX) == "devvm123"
    assert convert("nodot", FQDN, SHORT, INDEX) == "nodot"
    with pytest.raises(ConversionUnavailable):
        convert("devvm123", SHORT, FQDN, INDEX)
    with pytest.raises(ConversionUnavailable):
        convert("x", SHORT, "infra.types.ServiceID", INDEX)
    with pytest.raises(SemanticQueryError):
        convert("x", SHORT, "nope.Type", INDEX)


# -- data -------------------------------------------------------------------------------------

SHORTS = ["a", "b", "c"]
hosts_short = st.sampled_from(SHORTS)
hosts_fqdn = st.builds(lambda h, z: f"{h}.{z}.example.com", hosts_short, st.sampled_from(["z1", "z2"]))


def resources(n=200):
    rec = st.builds(lambda i, h: Record(RESOURCE, {1: i, 2: h, 3: "x86_64"}), st.text(max_size=3), hosts_short)
    return st.lists(rec, max_size=n).map(lambda rs: Dataset(RESOURCE, 1, rs))


def events(n=200):
    rec = st.builds(lambda h, e: Record(EVENT, {1: h, 2: e}), hosts_fqdn, st.sampled_from(["up", "down"]))
    return st.lists(rec, max_size=n).map(lambda rs: Dataset(EVENT, 1, rs))


def names(n=50):
    def make(h, f):
        return Record(NAMES, {1: h} if f is None else {1: h, 2: f})
    rec = st.builds(make, hosts_short, st.none() | hosts_fqdn)
    return st.lists(rec, max_size=n).map(lambda rs: Dataset(NAMES, 1, rs))


def short(fqdn):
    return fqdn.split(".")[0]


# brute-force oracles, written per asset without the index


def oracle_filter(ds, value):
    if ds.asset == RESOURCE:
        return [r for r in ds.records if r.fields[2] == value]
    if ds.asset == EVENT:
        return [r for r in ds.records if short(r.fields[1]) == value]
    if ds.asset == NAMES:
        return [r for r in ds.records if r.fields[1] == value and 2 in r.fields and short(r.fields[2]) == value]
    return list(ds.records)


def oracle_join(a, b):
    key = {RESOURCE: lambda r: r.fields[2], EVENT: lambda r: short(r.fields[1])}
    return [(ra, rb) for ra in a.records for rb in b.records if key[a.asset](ra) == key[b.asset](rb)]


# -- cross filter ---------------------------------------------------------------------------


def test_cross_filter_worked_example():
    res = Dataset(RESOURCE, 1, [Record(RESOURCE, {1: "1", 2: "devvm123", 3: "arm"}),
                                Record(RESOURCE, {1: "2", 2: "devvm9", 3: "arm"})])
    ev = Dataset(EVENT, 1, [Record(EVENT, {1: "devvm123.zone1.example.com", 2: "up"}),
                            Record(EVENT, {1: "devvm7.zone1.example.com", 2: "up"})])
    log = Dataset(LOG, 1, [Record(LOG, {1: "web", 2: "info", 3: "m"})])
    out = cross_filter([res, ev, log], CrossFilter(HOST, "devvm123", SHORT), INDEX)
    assert [len(d) for d in out] == [1, 1, 1]
    assert [d.applicable for d in out] == [True, True, False]
    assert out[2].records == log.records


def test_cross_filter_literal_type_must_match_semid():
    with pytest.raises(SemanticQueryError):
        cross_filter([], CrossFilter(HOST, "web", "infra.types.ServiceID"), INDEX)


def test_cross_filter_unconvertible_literal():
    ds = Dataset(RESOURCE, 1, [Record(RESOURCE, {1: "1", 2: "a", 3: "x"})])
    with pytest.raises(ConversionUnavailable):
        cross_filter([ds], CrossFilter(HOST, "a.z1.example.com", FQDN), INDEX)


@settings(max_examples=150)
@given(resources(), events(), names(), hosts_short)
def test_cross_filter_matches_oracle(res, ev, nm, value):
    out = cross_filter([res, ev, nm], CrossFilter(HOST, value, SHORT), INDEX)
    for before, after in zip([res, ev, nm], out):
        assert list(after.records) == oracle_filter(before, value)
        assert after.applicable


def ids(pairs):
    return Counter((id(a), id(b)) for a, b in pairs)


@given(hosts_short)
def test_qualified_filter_keeps_superset(value):
    rpc_like = Dataset(RPC, 1, [Record(RPC, {1: s, 2: t}) for s, t in
                                [(value, "x"), ("x", value), (value, value), ("x", "y")]])
    both = cross_filter([rpc_like], CrossFilter(SERVICE, value, None), INDEX)[0]
    target = cross_filter([rpc_like], CrossFilter(SERVICE, value, None, "TARGET"), INDEX)[0]
    full = cross_filter([rpc_like], CrossFilter(SERVICE, value, None,
                                                Qualifier("canopy.core.OneWayMsgExchangeActor", "TARGET")), INDEX)[0]
    assert {id(r) for r in both.records} <= {id(r) for r in target.records}
    assert target.records == full.records
    assert [r.fields for r in target.records] == [{1: "x", 2: value}, {1: value, 2: value}]


# -- join ------------------------------------------------------------------------------------


@settings(max_examples=150)
@given(resources(), events())
def test_join_matches_nested_loop(res, ev):
    assert semantic_join(res, ev, HOST, None, INDEX) == oracle_join(res, ev)


@settings(max_examples=100)
@given(resources(60), events(60))
def test_join_commutes(res, ev):
    ab = semantic_join(res, ev, HOST, None, INDEX)
    ba = semantic_join(ev, res, HOST, None, INDEX)
    assert ids(ab) == ids((a, b) for b, a in ba)


@settings(max_examples=100)
@given(resources(60), events(60), hosts_short)
def test_filter_then_join_is_subset(res, ev, value):
    fr, fe = cross_filter([res, ev], CrossFilter(HOST, value, SHORT), INDEX)
    filtered = semantic_join(fr, fe, HOST, None, INDEX)
    assert not ids(filtered) - ids(semantic_join(res, ev, HOST, None, INDEX))
    assert all(a.fields[2] == value for a, _ in filtered)


def test_join_with_qualifiers():
    rpc = Dataset(RPC, 1, [Record(RPC, {1: "web", 2: "db"}), Record(RPC, {1: "db", 2: "web"})])
    log = Dataset(LOG, 1, [Record(LOG, {1: "db", 2: "warn", 3: "slow"})])
    with pytest.raises(AmbiguousField):
        semantic_join(rpc, log, SERVICE, None, INDEX)
    pairs = semantic_join(rpc, log, SERVICE, ("TARGET", None), INDEX)
    assert [a.fields for a, _ in pairs] == [{1: "web", 2: "db"}]
    pairs = semantic_join(rpc, log, SERVICE, ("canopy.core.OneWayMsgExchangeActor=SOURCE", None), INDEX)
    assert [a.fields for a, _ in pairs] == [{1: "db", 2: "web"}]
    with pytest.raises(NotShared):
        semantic_join(rpc, log, SERVICE, ("MIDDLE", None), INDEX)


def test_join_not_shared():
    res = Dataset(RESOURCE, 1, [])
    log = Dataset(LOG, 1, [])
    with pytest.raises(NotShared):
        semantic_join(res, log, HOST, None, INDEX)


def test_join_skips_absent_values():
    from schemafirst.listings import listing_path
    from schemafirst.model import resolve_text
    opt = resolve_text('namespace t\ninclude "hosts.tsch"\nstruct Opt { 1: optional HostName h }', "t.Opt",
                       includes={"hosts.tsch": listing_path("hosts").read_text()})
    idx = SemanticIndex.from_schemas([opt, SCHEMAS["host_events"]])
    a = Dataset("t.Opt", 1, [Record("t.Opt", {}), Record("t.Opt", {1: "a"})])
    ev = Dataset(EVENT, 1, [Record(EVENT, {1: "a.z9.example.com", 2: "up"})])
    assert semantic_join(a, ev, HOST, None, idx) == [(a.records[1], ev.records[0])]
    flt = cross_filter([a], CrossFilter(HOST, "a", SHORT), idx)[0]
    assert flt.records == (a.records[1],)


def test_join_ambiguous_without_qualifiers():
    nm = Dataset(NAMES, 1, [])
    with pytest.raises(AmbiguousField):
        semantic_join(nm, Dataset(EVENT, 1, []), HOST, None, INDEX)


# -- datasets --------------------------------------------------------------------------------


def test_dataset_jsonl_round_trip(tmp_path):
    schema = SCHEMAS["host_events"]
    ds = Dataset(EVENT, 1, [Record(EVENT, {1: "a.z1", 2: "up"})])
    path = tmp_path / "e.jsonl"
    path.write_text(ds.to_jsonl(schema))
    assert Dataset.from_jsonl(path, schema, 1) == ds


def test_dataset_from_queue(store, tmp_path):
    from schemafirst.telemetry import QueueFile, RecordBuilder, emit
    publish(store, "host_events")
    publish(store, "rpc")
    q = QueueFile(tmp_path / "q")
    emit(RecordBuilder.for_asset(store, EVENT).update(host="a.z1", event="up"), q)
    emit(RecordBuilder.for_asset(store, RPC).update(source_service="a", target_service="b"), q)
    ds = Dataset.from_queue(tmp_path / "q", store)
    assert (ds.asset, ds.version, len(ds)) == (EVENT, 1, 1)
    assert len(Dataset.from_queue([tmp_path / "q"], store, RPC)) == 1
    empty = QueueFile(tmp_path / "empty")
    with pytest.raises(SemanticQueryError):
        Dataset.from_queue(empty.path, store)
    assert codec.to_named(ds.records[0], store.schema_for(EVENT, 1)) == {"host": "a.z1", "event": "up"}
