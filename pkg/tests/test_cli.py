import json
import subprocess
import sys

import pytest

from schemafirst.cli import EXIT_BREAKING, EXIT_INVALID, EXIT_OK, EXIT_USAGE, candidate_roots, main
from schemafirst.idl import parse
from schemafirst.listings import listing_path

COUNTER = "observability.RequestCounter"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def store_dir(tmp_path, monkeypatch):
    path = tmp_path / "store"
    monkeypatch.setenv("SCHEMAFIRST_STORE", str(path))
    return path


def actualize(capsys, name, *extra):
    return run(capsys, "actualize", listing_path(name), *extra)


# -- validate / diff -----------------------------------------------------------------


def test_validate_listings(capsys):
    code, out, _ = run(capsys, "validate", listing_path("request_counter"), listing_path("rpc"))
    assert code == EXIT_OK
    lines = out.splitlines()
    assert lines[0].startswith(f"ok {listing_path('request_counter')} {COUNTER} structural=")
    assert "canopy.core.RPC" in lines[1]


def test_validate_types_only_file(capsys):
    code, out, _ = run(capsys, "validate", listing_path("rpc").parent / "infra_types.tsch")
    assert code == EXIT_OK and "(no root struct)" in out


def test_validate_invalid_and_missing(capsys, tmp_path):
    bad = tmp_path / "bad.tsch"
    bad.write_text("namespace x\nstruct A { 1: Missing m }")
    code, out, _ = run(capsys, "validate", bad)
    assert code == EXIT_INVALID and out.startswith("error")
    code, _, err = run(capsys, "validate", tmp_path / "absent.tsch")
    assert code == EXIT_USAGE and "absent.tsch" in err


def test_candidate_roots():
    assert candidate_roots(parse(listing_path("rpc").read_text())) == ["canopy.core.RPC"]
    assert candidate_roots(parse("namespace n\nstruct A { 1: B b }\nstruct B { 1: i32 x }")) == ["n.A"]


def test_diff(capsys, tmp_path):
    v1, v2 = listing_path("request_counter_v1"), listing_path("request_counter")
    code, out, _ = run(capsys, "diff", v1, v2)
    assert code == EXIT_OK and out.splitlines()[-1] == "compatible" and "AddField" in out
    code, out, _ = run(capsys, "diff", v2, v1, "--json")
    assert code == EXIT_BREAKING and json.loads(out)["outcome"] == "breaking"
    assert run(capsys, "diff", v2, v1, "--allow-removals")[0] == EXIT_OK
    assert run(capsys, "diff", v1, listing_path("rpc"))[0] == EXIT_INVALID


# -- registry commands ------------------------------------------------------------------


def test_actualize_flow(capsys, store_dir, tmp_path):
    code, out, _ = actualize(capsys, "request_counter_v1", "--author", "alice")
    assert (code, out.split()[0]) == (EXIT_OK, "v1")
    code, out, _ = actualize(capsys, "request_counter", "--expected-parent", "1")
    assert out.split()[0] == "v2" and "AddField" in out
    assert actualize(capsys, "request_counter")[1].split()[0] == "v2"
    code, out, _ = actualize(capsys, "request_counter_v1")
    assert code == EXIT_BREAKING and json.loads(out)["outcome"] == "breaking"
    code, _, err = actualize(capsys, "request_counter", "--expected-parent", "1")
    assert code == EXIT_USAGE and "ConcurrentModification" in err
    assert (store_dir / "assets" / COUNTER / "v2.json").is_file()


def test_actualize_needs_store(capsys, monkeypatch):
    monkeypatch.delenv("SCHEMAFIRST_STORE", raising=False)
    code, _, err = actualize(capsys, "request_counter")
    assert code == EXIT_USAGE and "--store" in err


def test_encode_decode(capsys, store_dir, tmp_path):
    actualize(capsys, "request_counter_v1")
    actualize(capsys, "request_counter")
    record = {"service_id": "foo", "endpoint": "bar", "status_code": 200, "shard_id": "baz"}
    code, out, _ = run(capsys, "encode", json.dumps(record), "--asset", COUNTER)
    payload = out.strip()
    assert code == EXIT_OK and payload.startswith("5346")
    code, out, _ = run(capsys, "decode", payload)
    assert json.loads(out)["record"] == record
    code, out, _ = run(capsys, "decode", payload, "--at-version", "1")
    got = json.loads(out)
    assert got["skipped_ids"] == [4] and got["decoded_with"] == 1 and "shard_id" not in got["record"]
    bin_path = tmp_path / "p.bin"
    rec_path = tmp_path / "r.json"
    rec_path.write_text(json.dumps(record))
    assert run(capsys, "encode", f"@{rec_path}", "--asset", COUNTER, "--out", bin_path)[0] == EXIT_OK
    assert bin_path.read_bytes().hex() == payload
    assert json.loads(run(capsys, "decode", f"@{bin_path}")[1])["version"] == 2


def test_encode_decode_errors(capsys, store_dir):
    actualize(capsys, "request_counter")
    code, _, err = run(capsys, "encode", '{"service_id": "a"}', "--asset", COUNTER)
    assert code == EXIT_INVALID and "MissingRequiredField" in err
    assert run(capsys, "encode", '{"status_code": "x"}', "--asset", COUNTER)[0] == EXIT_INVALID
    assert run(capsys, "encode", "{not json", "--asset", COUNTER)[0] == EXIT_USAGE
    assert run(capsys, "encode", "{}", "--asset", "no.Such")[0] == EXIT_USAGE
    assert run(capsys, "decode", "zz")[0] == EXIT_USAGE
    assert run(capsys, "decode", "0000")[0] == EXIT_INVALID
    good = run(capsys, "encode", json.dumps({"service_id": "a", "endpoint": "b", "status_code": 1, "shard_id": "c"}),
               "--asset", COUNTER)[1].strip()
    assert run(capsys, "decode", good[:-4])[0] == EXIT_INVALID
    assert run(capsys, "decode", good, "--at-version", "7")[0] == EXIT_INVALID


def test_query_commands(capsys, store_dir, tmp_path):
    for name in ("host_resource_typed", "host_events", "rpc", "service_log"):
        assert actualize(capsys, name)[0] == EXIT_OK
    code, out, _ = run(capsys, "query", "shared-dims", "infra.resource.HostResource", "infra.events.HostEvent")
    assert json.loads(out) == ["InfraEnum.DataCenter_Host"]
    assert "InfraEnum.Service" in json.loads(run(capsys, "query", "index")[1])

    res = tmp_path / "res.jsonl"
    res.write_text('{"id": "1", "name": "devvm1", "arch": "arm"}\n{"id": "2", "name": "devvm2", "arch": "x86"}\n')
    ev = tmp_path / "ev.jsonl"
    ev.write_text('{"host": "devvm1.z.example.com", "event": "up"}\n')
    code, out, _ = run(capsys, "query", "cross-filter", f"infra.resource.HostResource={res}",
                       f"infra.events.HostEvent@1={ev}", "--semid", "InfraEnum.DataCenter_Host",
                       "--value", "devvm1", "--rich-type", "infra.HostName")
    got = json.loads(out)
    assert code == EXIT_OK and [len(d["records"]) for d in got] == [1, 1]
    code, out, _ = run(capsys, "query", "join", f"infra.resource.HostResource={res}", f"infra.events.HostEvent={ev}",
                       "--semid", "InfraEnum.DataCenter_Host")
    assert [[a["name"], b["event"]] for a, b in json.loads(out)] == [["devvm1", "up"]]

    rpc = tmp_path / "rpc.jsonl"
    rpc.write_text('{"source_service": "web", "target_service": "db"}\n')
    log = tmp_path / "log.jsonl"
    log.write_text('{"service": "db", "level": "warn", "message": "slow"}\n')
    code, _, err = run(capsys, "query", "join", f"canopy.core.RPC={rpc}", f"canopy.logs.ServiceLog={log}",
                       "--semid", "InfraEnum.Service")
    assert code == EXIT_INVALID and "AmbiguousField" in err
    code, out, _ = run(capsys, "query", "join", f"canopy.core.RPC={rpc}", f"canopy.logs.ServiceLog={log}",
                       "--semid", "InfraEnum.Service", "--qualifiers", "TARGET,")
    assert len(json.loads(out)) == 1


def test_demo(capsys, store_dir, tmp_path):
    code, out, _ = run(capsys, "demo", "--producers", "2", "--records", "20", "--json", "--workdir", tmp_path / "w")
    report = json.loads(out)
    assert code == EXIT_OK and report["decoded"] == 40 and report["failures"] == []
    assert (tmp_path / "w" / "producer-1.queue").is_file()


def test_new_skeleton(capsys, tmp_path):
    out_path = tmp_path / "a.tsch"
    assert run(capsys, "new", "--asset", "team.MyAsset", "--out", out_path)[0] == EXIT_OK
    assert run(capsys, "validate", out_path)[0] == EXIT_OK
    assert run(capsys, "new", "--asset", "team.MyAsset", "--out", out_path)[0] == EXIT_USAGE
    assert run(capsys, "new", "--asset", "team.MyAsset", "--out", out_path, "--force")[0] == EXIT_OK
    assert run(capsys, "new", "--asset", "NoNamespace")[0] == EXIT_USAGE


def test_usage_errors(capsys):
    assert run(capsys, "bogus")[0] == EXIT_USAGE
    assert run(capsys, "--help")[0] == EXIT_OK


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "schemafirst", "validate", str(listing_path("hosts"))],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "infra.HostNames" in proc.stdout


def test_serve_and_actualize_over_http(tmp_path, capsys):
    import socket
    import time
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        port = s.getsockname()[1]
    proc = subprocess.Popen([sys.executable, "-m", "schemafirst", "serve", "--store", str(tmp_path / "s"),
                             "--listen", f"127.0.0.1:{port}"], stdout=subprocess.PIPE, text=True)
    try:
        assert proc.stdout.readline().startswith("serving")
        url = f"http://127.0.0.1:{port}"
        for _ in range(50):
            code, out, _ = actualize(capsys, "request_counter", "--url", url)
            if code == EXIT_OK:
                break
            time.sleep(0.1)
        assert out.split()[0] == "v1"
        assert (tmp_path / "s" / "assets" / COUNTER / "v1.json").is_file()
    finally:
        proc.terminate()
        proc.wait(timeout=10)
