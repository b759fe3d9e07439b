"""End-to-end demo: producers -> queue files -> registry-driven consumers.

Each producer thread writes its own queue file, alternating RequestCounter
and RPC records.  Halfway through, the producers pause while the
``shard_id`` field is published as a new RequestCounter version; the rest
of the records are written at the new version.  Two consumers read every
frame: one resolves schemas through the registry at each payload's
version, the other is pinned to the versions current when the run began
and reports the field ids it had to skip.
"""

from __future__ import annotations

import json
import random
import tempfile
import threading
import time
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .. import codec
from ..errors import SchemaFirstError
from ..listings import listing_root, listing_sources
from .builder import RecordBuilder
from .queue import QueueFile, emit

COUNTER = listing_root("request_counter")
RPC = listing_root("rpc")
SERVICES = ("web", "feed", "ads", "search", "auth")
ENDPOINTS = ("/", "/login", "/feed", "/api/v1/items")
STATUS = (200, 200, 200, 404, 500)


@dataclass
class PipelineReport:
    producers: int
    records_per_producer: int
    emitted: int = 0
    decoded: int = 0
    failures: list[str] = field(default_factory=list)
    per_asset: dict[str, int] = field(default_factory=dict)
    per_version: dict[str, int] = field(default_factory=dict)
    published_version: Optional[int] = None
    pinned_versions: dict[str, int] = field(default_factory=dict)
    pinned_decoded: int = 0
    pinned_failures: list[str] = field(default_factory=list)
    frames_with_skips: int = 0
    skipped_fields: dict[str, int] = field(default_factory=dict)
    mean_binary_bytes: float = 0.0
    mean_json_bytes: float = 0.0
    elapsed_s: float = 0.0

    @property
    def size_ratio(self) -> Optional[float]:
        return self.mean_binary_bytes / self.mean_json_bytes if self.mean_json_bytes else None

    def to_dict(self) -> dict:
        return {
            "producers": self.producers,
            "records_per_producer": self.records_per_producer,
            "emitted": self.emitted,
            "decoded": self.decoded,
            "failures": self.failures,
            "per_asset": dict(sorted(self.per_asset.items())),
            "per_version": dict(sorted(self.per_version.items())),
            "published_version": self.published_version,
            "pinned_consumer": {
                "versions": dict(sorted(self.pinned_versions.items())),
                "decoded": self.pinned_decoded,
                "failures": self.pinned_failures,
                "frames_with_skips": self.frames_with_skips,
                "skipped_fields": dict(sorted(self.skipped_fields.items())),
            },
            "size": {
                "mean_binary_bytes": round(self.mean_binary_bytes, 2),
                "mean_json_bytes": round(self.mean_json_bytes, 2),
                "binary_to_json_ratio": None if self.size_ratio is None else round(self.size_ratio, 3),
            },
            "elapsed_s": round(self.elapsed_s, 3),
        }

    def format(self) -> str:
        lines = [
            f"producers: {self.producers} x {self.records_per_producer} records",
            f"emitted: {self.emitted}  decoded: {self.decoded}  failures: {len(self.failures)}",
        ]
        for asset, n in sorted(self.per_asset.items()):
            lines.append(f"  {asset}: {n}")
        for key, n in sorted(self.per_version.items()):
            lines.append(f"  {key}: {n}")
        lines.append(f"mid-run publish: {COUNTER} v{self.published_version}")
        pinned = ", ".join(f"{a}@{v}" for a, v in sorted(self.pinned_versions.items()))
        lines.append(f"pinned consumer ({pinned}): decoded {self.pinned_decoded}, "
                     f"failures {len(self.pinned_failures)}, frames with skipped fields {self.frames_with_skips}")
        for key, n in sorted(self.skipped_fields.items()):
            lines.append(f"  skipped {key}: {n}")
        lines.append(f"mean bytes/record: binary {self.mean_binary_bytes:.1f}, "
                     f"key-value JSON {self.mean_json_bytes:.1f}")
        if self.size_ratio is not None:
            lines.append(f"binary/JSON size ratio: {self.size_ratio:.3f}")
        lines.append(f"elapsed: {self.elapsed_s:.3f}s")
        for f in self.failures + self.pinned_failures:
            lines.append(f"  error: {f}")
        return "\n".join(lines)


def ensure_demo_schemas(store) -> dict[str, int]:
    """Publish the demo's starting schemas if absent; return their latest versions."""
    out = {}
    for name in ("request_counter_v1", "rpc"):
        root = listing_root(name)
        if store.latest_version(root) is None:
            main, includes = listing_sources(name)
            store.actualize(root, main, "pipeline-demo", includes=includes)
        out[root] = store.latest_version(root)
    return out


def _fill(builder: RecordBuilder, rng: random.Random, n: int) -> RecordBuilder:
    if builder.type_fqn == COUNTER:
        builder.set("service_id", rng.choice(SERVICES))
        builder.set("endpoint", rng.choice(ENDPOINTS))
        builder.set("status_code", rng.choice(STATUS))
        if builder.schema.root_def.field_named("shard_id") is not None:
            builder.set("shard_id", f"shard-{n % 7}")
    else:
        src, dst = rng.sample(SERVICES, 2)
        builder.set("source_service", src).set("target_service", dst)
    return builder


def _produce(store, queue: QueueFile, seed: int, count: int, barrier: threading.Barrier, errors: list):
    rng = random.Random(seed)
    half = count // 2
    try:
        for phase, (lo, hi) in enumerate(((0, half), (half, count))):
            if phase == 1:
                barrier.wait()
            builders = {a: RecordBuilder.for_asset(store, a) for a in (COUNTER, RPC)}
            for n in range(lo, hi):
                asset = COUNTER if n % 2 == 0 else RPC
                b = builders[asset]
                fresh = RecordBuilder(b.schema, b.version)
                emit(_fill(fresh, rng, n), queue)
    except threading.BrokenBarrierError:
        errors.append(f"producer {seed}: barrier broken")
    except Exception as exc:  # reported, not raised
        errors.append(f"producer {seed}: {type(exc).__name__}: {exc}")
        barrier.abort()


def consume(store, queues: list[QueueFile], report: PipelineReport, pinned: dict) -> None:
    """Decode every frame twice: via the registry and via the pinned schemas."""
    binary = json_bytes = 0
    per_asset, per_version, skipped = Counter(), Counter(), Counter()
    for q in queues:
        for payload in q.frames():
            try:
                d = codec.decode(payload, store)
            except SchemaFirstError as exc:
                report.failures.append(f"{type(exc).__name__}: {exc}")
                continue
            report.decoded += 1
            per_asset[d.asset] += 1
            per_version[f"{d.asset}@{d.version}"] += 1
            binary += len(payload)
            named = codec.to_named(d.record, store.schema_for(d.asset, d.version), json_safe=True)
            json_bytes += len(json.dumps({"asset": d.asset, **named}, separators=(",", ":")).encode())
            try:
                old = codec.decode(payload, pinned)
            except SchemaFirstError as exc:
                report.pinned_failures.append(f"{type(exc).__name__}: {exc}")
                continue
            report.pinned_decoded += 1
            if old.skipped_ids:
                report.frames_with_skips += 1
                for fid in old.skipped_ids:
                    skipped[f"{d.asset}#{fid}"] += 1
    report.per_asset = dict(per_asset)
    report.per_version = dict(per_version)
    report.skipped_fields = dict(skipped)
    if report.decoded:
        report.mean_binary_bytes = binary / report.decoded
        report.mean_json_bytes = json_bytes / report.decoded


def pipeline_demo(producers: int, records: int, store, workdir=None, seed: int = 0) -> PipelineReport:
    """Run the producer/consumer demo against ``store`` and return its report."""
    started = time.perf_counter()
    report = PipelineReport(producers, records)
    start_versions = ensure_demo_schemas(store)
    report.pinned_versions = dict(start_versions)
    pinned_schemas = {a: store.schema_for(a, v) for a, v in start_versions.items()}

    def pinned(asset, version):
        try:
            return pinned_schemas[asset]
        except KeyError:
            return store.schema_for(asset, version)

    def publish():
        main, includes = listing_sources("request_counter")
        report.published_version = store.actualize(COUNTER, main, "pipeline-demo", includes=includes)[0]

    tmp = None
    if workdir is None:
        tmp = tempfile.TemporaryDirectory(prefix="schemafirst-demo-")
        workdir = tmp.name
    try:
        workdir = Path(workdir)
        workdir.mkdir(parents=True, exist_ok=True)
        queues = []
        for i in range(producers):
            path = workdir / f"producer-{i}.queue"
            path.write_bytes(b"")
            queues.append(QueueFile(path))
        barrier = threading.Barrier(max(producers, 1), action=publish)
        errors: list[str] = []
        threads = [
            threading.Thread(target=_produce, args=(store, q, seed * 1000 + i, records, barrier, errors))
            for i, q in enumerate(queues)
        ]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        if not threads:
            publish()
        report.failures.extend(errors)
        report.emitted = sum(len(q) for q in queues)
        consume(store, queues, report, pinned)
    finally:
        if tmp is not None:
            tmp.cleanup()
    report.elapsed_s = time.perf_counter() - started
    return report
