"""``schemafirst`` command line.

Exit codes: 0 success or compatible, 1 usage or I/O error, 2 breaking
change, 3 validation failure (schema, record or payload).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import codec
from .compat import check
from .errors import (
    BreakingRejected,
    CodecError,
    ConcurrentModification,
    IdlError,
    InvalidDocument,
    NotFound,
    RegistryError,
    RootMismatch,
    SchemaError,
    SchemaFirstError,
    SemanticQueryError,
    UnknownField,
)
from .idl import AstComposite, AstDocument, documents_from_texts, read_sources
from .model import resolve
from .registry import STORE_ENV, RegistryClient, SchemaStore, make_server
from .semquery import CrossFilter, Dataset, build_index, cross_filter, semantic_join, shared_dimensions

EXIT_OK, EXIT_USAGE, EXIT_BREAKING, EXIT_INVALID = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _err(msg: str) -> None:
    print(f"schemafirst: {msg}", file=sys.stderr)


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False)


def candidate_roots(doc: AstDocument) -> list[str]:
    """Structs of ``doc`` that no other struct of ``doc`` refers to or embeds."""
    structs = {d.name: d for d in doc.definitions if isinstance(d, AstComposite)}
    used = set()
    for d in structs.values():
        used.update(e.split(".")[-1] for e in d.embeds)
        for f in d.fields:
            stack = [f.type]
            while stack:
                t = stack.pop()
                used.add(t.name.split(".")[-1])
                stack.extend(t.args)
        for a in d.annotations:
            if a.name == "SemanticQualifier":
                used.add(d.name)
    return [f"{doc.namespace}.{n}" for n in structs if n not in used]


def _load(path: str):
    try:
        main, includes = read_sources(path)
    except OSError as exc:
        raise UsageError(f"{path}: {exc.strerror or exc}") from None
    return main, includes, documents_from_texts(main, includes, path)


def _pick_root(docs, root: Optional[str], path: str) -> str:
    if root:
        return root
    roots = candidate_roots(docs[0])
    if len(roots) != 1:
        found = ", ".join(roots) or "none"
        raise UsageError(f"{path}: cannot infer the root struct (candidates: {found}); pass --asset")
    return roots[0]


def _registry(args):
    if getattr(args, "url", None):
        return RegistryClient(args.url)
    store = getattr(args, "store", None) or os.environ.get(STORE_ENV)
    if not store:
        raise UsageError(f"no store given; use --store or set {STORE_ENV}")
    return SchemaStore(store)


# -- commands ------------------------------------------------------------------


def cmd_validate(args) -> int:
    unreadable = invalid = False
    for path in args.paths:
        try:
            _, _, docs = _load(path)
            roots = [args.asset] if args.asset else candidate_roots(docs[0])
            if not roots:
                print(f"ok {path} (no root struct)")
            for root in roots:
                schema = resolve(docs, root)
                s, m = schema.fingerprints()
                print(f"ok {path} {root} structural={s:016x} semantic={m:016x}")
                for lint in schema.lints:
                    print(f"  note: {lint}")
        except UsageError as exc:
            _err(str(exc))
            unreadable = True
        except (IdlError, SchemaError) as exc:
            print(f"error {path}: {exc}")
            invalid = True
    return EXIT_INVALID if invalid else EXIT_USAGE if unreadable else EXIT_OK


def cmd_diff(args) -> int:
    _, _, old_docs = _load(args.old)
    _, _, new_docs = _load(args.new)
    root = _pick_root(new_docs, args.asset, args.new)
    try:
        verdict = check(resolve(old_docs, root), resolve(new_docs, root), allow_removals=args.allow_removals)
    except RootMismatch as exc:
        raise UsageError(str(exc)) from None
    if args.json:
        print(_dump(verdict.to_dict()))
    else:
        for r in verdict.rulings:
            print(f"{r.ruling:10} {r.change}  [{r.rule}]")
        print(verdict.outcome)
    return EXIT_BREAKING if verdict.breaking else EXIT_OK


def cmd_actualize(args) -> int:
    main, includes, docs = _load(args.path)
    asset = _pick_root(docs, args.asset, args.path)
    registry = _registry(args)
    try:
        version, verdict = registry.actualize(asset, main, args.author, args.expected_parent, includes,
                                              allow_removals=args.allow_removals)
    except BreakingRejected as exc:
        print(_dump(exc.verdict.to_dict()))
        return EXIT_BREAKING
    print(f"v{version}")
    for r in verdict.rulings:
        print(f"  {r.change}")
    return EXIT_OK


def cmd_serve(args) -> int:
    host, _, port = args.listen.rpartition(":")
    if not port.isdigit():
        raise UsageError(f"--listen expects host:port, got {args.listen!r}")
    store = _registry(argparse.Namespace(store=args.store, url=None))
    server = make_server(store, host or "127.0.0.1", int(port))
    h, p = server.server_address[:2]
    print(f"serving {store.root} on http://{h}:{p}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return EXIT_OK


def _read_record_arg(text: str):
    if text == "-":
        text = sys.stdin.read()
    elif text.startswith("@"):
        text = Path(text[1:]).read_text(encoding="utf-8")
    try:
        return json.loads(text)
    except ValueError as exc:
        raise UsageError(f"record is not valid JSON: {exc}") from None


def cmd_encode(args) -> int:
    registry = _registry(args)
    data = _read_record_arg(args.record)
    entry = registry.get(args.asset) if args.version is None else registry.get(args.asset, args.version)
    record = codec.from_named(data, entry.schema, json_safe=True)
    payload = codec.encode(record, entry.schema, entry.version)
    if args.out:
        Path(args.out).write_bytes(payload)
        print(f"wrote {len(payload)} bytes to {args.out}")
    else:
        print(payload.hex())
    return EXIT_OK


def _read_payload_arg(text: str) -> bytes:
    if text.startswith("@"):
        return Path(text[1:]).read_bytes()
    if text == "-":
        raw = sys.stdin.buffer.read()
        try:
            return bytes.fromhex(raw.decode("ascii"))
        except (UnicodeDecodeError, ValueError):
            return raw
    try:
        return bytes.fromhex(text)
    except ValueError:
        raise UsageError("payload must be hex, @file or -") from None


def cmd_decode(args) -> int:
    payload = _read_payload_arg(args.payload)
    registry = _registry(args)
    asset, version, _ = codec.read_header(payload)
    schema = registry.schema_for(asset, args.at_version if args.at_version else version)
    d = codec.decode(payload, schema)
    out = {
        "asset": d.asset,
        "version": d.version,
        "decoded_with": args.at_version or d.version,
        "record": codec.to_named(d.record, schema, json_safe=True),
        "skipped_ids": d.skipped_ids,
    }
    if d.skipped_nested:
        out["skipped_nested"] = [f"{t}#{i}" for t, i in d.skipped_nested]
    print(_dump(out))
    return EXIT_OK


def _dataset(arg: str, registry) -> Dataset:
    """``ASSET[@VERSION]=PATH.jsonl`` or ``PATH.queue``."""
    if "=" in arg:
        target, path = arg.split("=", 1)
        asset, _, v = target.partition("@")
        entry = registry.get(asset, int(v)) if v else registry.get(asset)
        return Dataset.from_jsonl(path, entry.schema, entry.version)
    return Dataset.from_queue(arg, registry)


def cmd_query(args) -> int:
    registry = _registry(args)
    index = build_index(registry)
    if args.query == "shared-dims":
        print(_dump(shared_dimensions(args.asset_a, args.asset_b, index)))
        return EXIT_OK
    if args.query == "index":
        print(_dump(index.to_dict()))
        return EXIT_OK
    if args.query == "cross-filter":
        datasets = [_dataset(s, registry) for s in args.datasets]
        result = cross_filter(datasets, CrossFilter(args.semid, args.value, args.rich_type, args.qualifier), index)
        out = []
        for ds in result:
            schema = registry.schema_for(ds.asset, ds.version)
            out.append({
                "asset": ds.asset,
                "version": ds.version,
                "applicable": ds.applicable,
                "records": [codec.to_named(r, schema, json_safe=True) for r in ds.records],
            })
        print(_dump(out))
        return EXIT_OK
    a, b = (_dataset(s, registry) for s in (args.dataset_a, args.dataset_b))
    quals = None
    if args.qualifiers:
        qa, _, qb = args.qualifiers.partition(",")
        quals = (qa or None, qb or None)
    pairs = semantic_join(a, b, args.semid, quals, index)
    sa, sb = registry.schema_for(a.asset, a.version), registry.schema_for(b.asset, b.version)
    print(_dump([[codec.to_named(x, sa, json_safe=True), codec.to_named(y, sb, json_safe=True)] for x, y in pairs]))
    return EXIT_OK


def cmd_demo(args) -> int:
    from .telemetry import pipeline_demo

    store = _registry(argparse.Namespace(store=args.store, url=None))
    report = pipeline_demo(args.producers, args.records, store, args.workdir, args.seed)
    print(_dump(report.to_dict()) if args.json else report.format())
    return EXIT_OK if not (report.failures or report.pinned_failures) else EXIT_INVALID


SKELETON = """\
namespace {namespace}

@DisplayName{{"{name}"}}
@Description{{"TODO: what one record of this asset represents."}}
struct {name} {{
  @DisplayName{{"TODO"}}
  1: string example_dimension

  @Unit{{"count"}}
  @Measurement
  2: optional i64 example_value
}}
"""


def cmd_new(args) -> int:
    namespace, _, name = args.asset.rpartition(".")
    if not namespace or not name.isidentifier():
        raise UsageError(f"--asset must be a dotted fqn such as team.MyAsset, got {args.asset!r}")
    text = SKELETON.format(namespace=namespace, name=name)
    if args.out:
        out = Path(args.out)
        if out.exists() and not args.force:
            raise UsageError(f"{out} exists; pass --force to overwrite")
        out.write_text(text, encoding="utf-8")
        print(f"wrote {out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


# -- argument parsing ----------------------------------------------------------


def _store_flags(p: argparse.ArgumentParser, url: bool = True) -> None:
    p.add_argument("--store", help=f"store directory (default: ${STORE_ENV})")
    if url:
        p.add_argument("--url", help="registry service base URL, instead of a local store")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="schemafirst", description="Schema-first telemetry tooling.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="parse and resolve schema files")
    p.add_argument("paths", nargs="+")
    p.add_argument("--asset", help="root struct fqn (default: every unreferenced struct)")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("diff", help="classify the changes between two schema files")
    p.add_argument("old")
    p.add_argument("new")
    p.add_argument("--asset")
    p.add_argument("--json", action="store_true")
    p.add_argument("--allow-removals", action="store_true")
    p.set_defaults(func=cmd_diff)

    p = sub.add_parser("actualize", help="publish a schema version if it is compatible")
    p.add_argument("path")
    p.add_argument("--asset")
    _store_flags(p)
    p.add_argument("--author", default=os.environ.get("USER", ""))
    p.add_argument("--expected-parent", type=int)
    p.add_argument("--allow-removals", action="store_true")
    p.set_defaults(func=cmd_actualize)

    p = sub.add_parser("serve", help="run the registry HTTP service")
    _store_flags(p, url=False)
    p.add_argument("--listen", default="127.0.0.1:8765")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("encode", help="encode a JSON record as a payload")
    p.add_argument("record", help="JSON text, @file or -")
    p.add_argument("--asset", required=True)
    p.add_argument("--version", type=int)
    p.add_argument("--out", help="write binary payload here instead of printing hex")
    _store_flags(p)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="decode a payload to a JSON record")
    p.add_argument("payload", help="hex text, @file (binary) or -")
    p.add_argument("--at-version", type=int, help="decode with this schema version instead")
    _store_flags(p)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("query", help="semantic queries across assets")
    qs = p.add_subparsers(dest="query", required=True)
    q = qs.add_parser("shared-dims")
    q.add_argument("asset_a")
    q.add_argument("asset_b")
    qs.add_parser("index")
    q = qs.add_parser("cross-filter")
    q.add_argument("datasets", nargs="+", help="ASSET[@VERSION]=FILE.jsonl or FILE.queue")
    q.add_argument("--semid", required=True)
    q.add_argument("--value", required=True)
    q.add_argument("--rich-type", required=True)
    q.add_argument("--qualifier")
    q = qs.add_parser("join")
    q.add_argument("dataset_a")
    q.add_argument("dataset_b")
    q.add_argument("--semid", required=True)
    q.add_argument("--qualifiers", help="QA,QB; either side may be empty")
    for q in qs.choices.values():
        _store_flags(q)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("demo", help="run the producer/consumer pipeline demo")
    _store_flags(p, url=False)
    p.add_argument("--producers", type=int, default=2)
    p.add_argument("--records", type=int, default=100)
    p.add_argument("--workdir")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_demo)

    p = sub.add_parser("new", help="write a skeleton schema for a new asset")
    p.add_argument("--asset", required=True)
    p.add_argument("--out")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_new)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except UsageError as exc:
        _err(str(exc))
        return EXIT_USAGE
    except OSError as exc:
        _err(str(exc))
        return EXIT_USAGE
    except (IdlError, SchemaError, InvalidDocument, CodecError, UnknownField, SemanticQueryError) as exc:
        _err(f"{type(exc).__name__}: {exc}")
        return EXIT_INVALID
    except (NotFound, ConcurrentModification, RegistryError) as exc:
        _err(f"{type(exc).__name__}: {exc}")
        return EXIT_USAGE
    except SchemaFirstError as exc:
        _err(f"{type(exc).__name__}: {exc}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
