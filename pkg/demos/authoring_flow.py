"""Author a schema, evolve it, and watch the registry gate the changes.

    python demos/authoring_flow.py
"""

import tempfile

from schemafirst import codec
from schemafirst.errors import BreakingRejected
from schemafirst.listings import listing_sources
from schemafirst.registry import SchemaStore
from schemafirst.telemetry import RecordBuilder

ASSET = "observability.RequestCounter"


def main():
    store = SchemaStore(tempfile.mkdtemp(prefix="schemafirst-authoring-"))
    v1_text, _ = listing_sources("request_counter_v1")
    v2_text, _ = listing_sources("request_counter")

    version, _ = store.actualize(ASSET, v1_text, "alice")
    print(f"published {ASSET} v{version}")

    # a service emits at v1 through a schema-checked builder
    old_payload = (RecordBuilder.for_asset(store, ASSET)
                   .update(service_id="web", endpoint="/login", status_code=200)
                   .encode())
    print(f"v1 payload: {old_payload.hex()}")

    # adding shard_id is compatible
    version, verdict = store.actualize(ASSET, v2_text, "bob", expected_parent=1)
    print(f"published v{version}: " + ", ".join(str(c) for c in verdict.changes))

    # retyping status_code is not
    retyped = v2_text.replace("typedef i32   StatusCode", "typedef string StatusCode")
    try:
        store.actualize(ASSET, retyped, "carol", expected_parent=2)
    except BreakingRejected as exc:
        for r in exc.verdict.rulings:
            print(f"rejected: {r.change} [{r.rule}]")

    # old payloads still decode with the schema they were written at
    d = codec.decode(old_payload, store)
    print(f"decoded v{d.version} payload:", codec.to_named(d.record, store.schema_for(ASSET, d.version)))

    # and a new payload read by a v1-pinned consumer skips the unknown field
    new_payload = (RecordBuilder.for_asset(store, ASSET)
                   .update(service_id="web", endpoint="/login", status_code=500, shard_id="s3")
                   .encode())
    pinned = codec.decode(new_payload, store.schema_for(ASSET, 1))
    print(f"v1 reader skipped field ids {pinned.skipped_ids}")
    print(f"store lives at {store.root}")


if __name__ == "__main__":
    main()
