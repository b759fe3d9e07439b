"""Filter and join datasets that name the same thing differently.

HostResource stores short host names, HostEvent stores FQDNs.  Both carry
the DataCenter_Host semantic type, so one filter value reaches both.  RPC
has two service fields told apart by SOURCE/TARGET qualifiers.

    python demos/semantic_queries.py
"""

import tempfile

from schemafirst.codec import Record
from schemafirst.errors import AmbiguousField, ConversionUnavailable
from schemafirst.listings import listing_root, listing_sources
from schemafirst.registry import SchemaStore
from schemafirst.semquery import CrossFilter, Dataset, build_index, cross_filter, semantic_join, shared_dimensions

HOST = "InfraEnum.DataCenter_Host"
SERVICE = "InfraEnum.Service"


def main():
    store = SchemaStore(tempfile.mkdtemp(prefix="schemafirst-query-"))
    for name in ("host_resource_typed", "host_events", "rpc", "service_log"):
        main_text, includes = listing_sources(name)
        store.actualize(listing_root(name), main_text, includes=includes)
    index = build_index(store)

    res_fqn, ev_fqn = listing_root("host_resource_typed"), listing_root("host_events")
    print("shared dimensions:", shared_dimensions(res_fqn, ev_fqn, index))

    resources = Dataset(res_fqn, 1, [
        Record(res_fqn, {1: "i-01", 2: "devvm123", 3: "x86_64"}),
        Record(res_fqn, {1: "i-02", 2: "devvm7", 3: "aarch64"}),
    ])
    events = Dataset(ev_fqn, 1, [
        Record(ev_fqn, {1: "devvm123.zone1.example.com", 2: "reboot"}),
        Record(ev_fqn, {1: "devvm7.zone2.example.com", 2: "kernel upgrade"}),
        Record(ev_fqn, {1: "devvm123.zone1.example.com", 2: "disk full"}),
    ])

    flt = CrossFilter(HOST, "devvm123", "infra.HostName")
    for ds in cross_filter([resources, events], flt, index):
        print(f"{ds.asset}: {len(ds)} record(s) for devvm123")

    try:
        cross_filter([resources], CrossFilter(HOST, "devvm123.zone1.example.com", "infra.HostNameWithFQDN"), index)
    except ConversionUnavailable as exc:
        print("short names cannot become FQDNs:", exc)

    for a, b in semantic_join(resources, events, HOST, None, index):
        print(f"  {a.fields[2]:10} {a.fields[3]:8} {b.fields[2]}")

    rpc_fqn, log_fqn = listing_root("rpc"), listing_root("service_log")
    calls = Dataset(rpc_fqn, 1, [Record(rpc_fqn, {1: "web", 2: "db"}), Record(rpc_fqn, {1: "db", 2: "auth"})])
    logs = Dataset(log_fqn, 1, [Record(log_fqn, {1: "db", 2: "warn", 3: "slow query"})])
    try:
        semantic_join(calls, logs, SERVICE, None, index)
    except AmbiguousField as exc:
        print("needs a qualifier:", exc)
    for side in ("SOURCE", "TARGET"):
        pairs = semantic_join(calls, logs, SERVICE, (side, None), index)
        print(f"{side}: " + "; ".join(f"{a.fields[1]}->{a.fields[2]} / {b.fields[3]}" for a, b in pairs))


if __name__ == "__main__":
    main()
