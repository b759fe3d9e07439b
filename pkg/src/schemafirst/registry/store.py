"""File-backed, append-only schema registry.

Layout under the store root::

    assets/<asset fqn>/v1.json, v2.json, ...   immutable version entries
    assets/<asset fqn>/index.json              latest version + fingerprint history

Version files are written to a temporary file and then hard-linked into
place, which fails if the name already exists, so two writers can never
both create ``vN``.  The index is replaced atomically after the link.
"""

from __future__ import annotations

import json
import os
import re
import tempfile
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from functools import cached_property
from pathlib import Path
from typing import Any, Mapping, Optional, Union

from ..compat import COMPATIBLE, MigrationTransform, Verdict, build_transforms, classify, diff
from ..errors import (
    BreakingRejected,
    ConcurrentModification,
    CorruptStore,
    InvalidDocument,
    NotFound,
    SchemaFirstError,
    UnknownAsset,
    UnknownVersion,
)
from ..idl import documents_from_texts, render
from ..model import CompositeDef, ResolvedSchema, resolve, semantic_fields

LATEST = "latest"
_FQN = re.compile(r"[A-Za-z_][A-Za-z0-9_]*(\.[A-Za-z_][A-Za-z0-9_]*)+")
_VFILE = re.compile(r"v([1-9][0-9]*)\.json")


def check_asset_id(asset: str) -> str:
    if not isinstance(asset, str) or not _FQN.fullmatch(asset):
        raise InvalidDocument(f"asset id must be a dotted identifier path, got {asset!r}")
    return asset


def _hex(n: int) -> str:
    return f"{n:016x}"


@dataclass(frozen=True)
class VersionEntry:
    asset: str
    version: int
    document_text: str
    resolved: Mapping[str, Any]
    fingerprints: tuple[str, str]
    created_at: str
    author: str
    included_documents: Mapping[str, str] = field(default_factory=dict)
    transform_from_previous: Optional[MigrationTransform] = None

    @cached_property
    def schema(self) -> ResolvedSchema:
        return ResolvedSchema.from_dict(self.resolved)

    @property
    def display_name(self) -> Optional[str]:
        root = self.resolved["types"][self.asset]
        return root.get("display_name")

    def to_dict(self) -> dict:
        return {
            "asset": self.asset,
            "version": self.version,
            "document_text": self.document_text,
            "included_documents": dict(sorted(self.included_documents.items())),
            "resolved": self.resolved,
            "fingerprints": {"structural": self.fingerprints[0], "semantic": self.fingerprints[1]},
            "transform_from_previous": (
                self.transform_from_previous.to_dict() if self.transform_from_previous else None
            ),
            "created_at": self.created_at,
            "author": self.author,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> VersionEntry:
        t = d.get("transform_from_previous")
        return cls(
            asset=d["asset"],
            version=int(d["version"]),
            document_text=d["document_text"],
            resolved=d["resolved"],
            fingerprints=(d["fingerprints"]["structural"], d["fingerprints"]["semantic"]),
            created_at=d["created_at"],
            author=d["author"],
            included_documents=dict(d.get("included_documents") or {}),
            transform_from_previous=MigrationTransform.from_dict(t) if t else None,
        )

    def verify(self) -> None:
        """Raise :class:`CorruptStore` if stored fingerprints disagree with the schema."""
        s, m = self.schema.fingerprints()
        if (_hex(s), _hex(m)) != tuple(self.fingerprints):
            raise CorruptStore(f"{self.asset} v{self.version}: fingerprints do not match resolved schema")


@dataclass(frozen=True)
class AssetSummary:
    asset: str
    latest: int
    display_name: Optional[str]

    def to_dict(self) -> dict:
        return {"asset": self.asset, "latest": self.latest, "display_name": self.display_name}


@dataclass(frozen=True)
class SemanticHit:
    asset: str
    path: str
    qualifiers: tuple[str, ...]
    rich_type: Optional[str]
    semantic_type: str = ""

    def to_dict(self) -> dict:
        return {
            "asset": self.asset,
            "path": self.path,
            "qualifiers": list(self.qualifiers),
            "rich_type": self.rich_type,
            "semantic_type": self.semantic_type,
        }


def _dump(obj) -> bytes:
    return (json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n").encode("utf-8")


def _write_temp(directory: Path, data: bytes) -> str:
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".json")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
    except BaseException:
        os.unlink(tmp)
        raise
    return tmp


class SchemaStore:
    """Versioned schema storage with a compatibility-gated publish step."""

    def __init__(self, root: Union[str, os.PathLike]):
        self.root = Path(root)
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()
        self._entries: dict[tuple[str, int], VersionEntry] = {}

    # -- paths and low-level reads --------------------------------------------

    def _asset_dir(self, asset: str) -> Path:
        return self.root / "assets" / check_asset_id(asset)

    def _lock(self, asset: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(asset, threading.Lock())

    def versions(self, asset: str) -> list[int]:
        d = self._asset_dir(asset)
        if not d.is_dir():
            return []
        return sorted(int(m.group(1)) for m in map(_VFILE.fullmatch, os.listdir(d)) if m)

    def latest_version(self, asset: str) -> Optional[int]:
        vs = self.versions(asset)
        return vs[-1] if vs else None

    def assets(self) -> list[str]:
        d = self.root / "assets"
        if not d.is_dir():
            return []
        return sorted(name for name in os.listdir(d) if _FQN.fullmatch(name) and self.versions(name))

    # -- reads -------------------------------------------------------------------

    def get(self, asset: str, selector: Union[int, str] = LATEST) -> VersionEntry:
        if not isinstance(asset, str) or not _FQN.fullmatch(asset):
            raise NotFound(f"no asset {asset!r}")
        if selector == LATEST:
            version = self.latest_version(asset)
            if version is None:
                raise NotFound(f"asset {asset} is not registered")
        else:
            version = int(selector)
        key = (asset, version)
        entry = self._entries.get(key)
        if entry is not None:
            return entry
        path = self._asset_dir(asset) / f"v{version}.json"
        try:
            raw = path.read_bytes()
        except FileNotFoundError:
            if self.latest_version(asset) is None:
                raise NotFound(f"asset {asset} is not registered") from None
            raise NotFound(f"asset {asset} has no version {version}") from None
        try:
            entry = VersionEntry.from_dict(json.loads(raw))
        except (ValueError, KeyError, TypeError) as exc:
            raise CorruptStore(f"{path}: {exc}") from None
        if entry.asset != asset or entry.version != version:
            raise CorruptStore(f"{path} holds {entry.asset} v{entry.version}")
        entry.verify()
        self._entries[key] = entry
        return entry

    def schema_for(self, asset: str, version: int) -> ResolvedSchema:
        """Schema lookup for the codec; raises UnknownAsset / UnknownVersion."""
        if not _FQN.fullmatch(asset) or self.latest_version(asset) is None:
            raise UnknownAsset(f"asset {asset} is not registered")
        try:
            return self.get(asset, version).schema
        except NotFound:
            raise UnknownVersion(f"asset {asset} has no version {version}") from None

    def list_assets(self, q: Optional[str] = None, semantic_type: Optional[str] = None) -> list[AssetSummary]:
        out = []
        for asset in self.assets():
            if q and q not in asset:
                continue
            entry = self.get(asset)
            if semantic_type and not any(
                sf.semantic_type == semantic_type for sf in semantic_fields(entry.schema)
            ):
                continue
            out.append(AssetSummary(asset, entry.version, entry.display_name))
        return out

    def search_semantic(self, semid: str) -> list[SemanticHit]:
        hits = []
        for asset in self.assets():
            for sf in semantic_fields(self.get(asset).schema):
                if sf.semantic_type == semid:
                    hits.append(SemanticHit(asset, sf.path, tuple(str(q) for q in sf.qualifiers),
                                            sf.rich_type, semid))
        return sorted(hits, key=lambda h: (h.asset, h.path))

    def transform_chain(self, asset: str, from_version: int, to_version: int) -> list[MigrationTransform]:
        """Transforms to apply, in order, to move a record from one version to another.

        Downgrades return each step already inverted.
        """
        for v in (from_version, to_version):
            self.get(asset, v)
        if from_version <= to_version:
            return [self._step(asset, v) for v in range(from_version + 1, to_version + 1)]
        return [self._step(asset, v).inverse() for v in range(from_version, to_version, -1)]

    def _step(self, asset: str, version: int) -> MigrationTransform:
        t = self.get(asset, version).transform_from_previous
        return t if t is not None else MigrationTransform(version - 1, version, asset=asset)

    def retired_ids(self, asset: str) -> set[tuple[str, int]]:
        """``(struct fqn, field id)`` pairs used by any earlier version but absent from the latest."""
        versions = self.versions(asset)
        if not versions:
            return set()
        seen: set[tuple[str, int]] = set()
        for v in versions[:-1]:
            seen |= _field_ids(self.get(asset, v).schema)
        return seen - _field_ids(self.get(asset, versions[-1]).schema)

    # -- writes ------------------------------------------------------------------

    def actualize(self, asset: str, document: str, author: str = "", expected_parent: Optional[int] = None,
                  includes: Optional[Mapping[str, str]] = None, *, allow_removals: bool = False,
                  ) -> tuple[int, Verdict]:
        """Validate ``document`` against the latest version and publish it if compatible.

        Returns ``(version, verdict)``.  An unchanged schema returns the
        current version and an empty verdict without writing anything.
        """
        check_asset_id(asset)
        includes = dict(includes or {})
        try:
            docs = documents_from_texts(document, includes, f"<{asset}>")
            schema = resolve(docs, asset)
        except SchemaFirstError as exc:
            raise InvalidDocument(str(exc)) from exc
        canonical = render(docs[0])
        included = {d.file: render(d) for d in docs[1:]}

        with self._lock(asset):
            latest = self.latest_version(asset)
            if expected_parent is not None and expected_parent != (latest or 0):
                raise ConcurrentModification(
                    f"{asset}: expected parent v{expected_parent}, latest is v{latest or 0}")
            if latest is None:
                version, verdict, transform = 1, COMPATIBLE, None
            else:
                previous = self.get(asset, latest).schema
                changes = diff(previous, schema, self.retired_ids(asset))
                verdict = classify(changes, previous, schema, allow_removals=allow_removals)
                if verdict.breaking:
                    raise BreakingRejected(verdict)
                if not changes:
                    return latest, verdict
                version = latest + 1
                transform = build_transforms(changes, latest, version, asset, allow_removals=allow_removals)
            s, m = schema.fingerprints()
            entry = VersionEntry(
                asset=asset,
                version=version,
                document_text=canonical,
                resolved=schema.to_dict(),
                fingerprints=(_hex(s), _hex(m)),
                created_at=datetime.now(timezone.utc).isoformat(timespec="microseconds"),
                author=author,
                included_documents=included,
                transform_from_previous=transform,
            )
            self._publish(entry)
            return version, verdict

    def _publish(self, entry: VersionEntry) -> None:
        d = self._asset_dir(entry.asset)
        d.mkdir(parents=True, exist_ok=True)
        final = d / f"v{entry.version}.json"
        tmp = _write_temp(d, _dump(entry.to_dict()))
        try:
            os.link(tmp, final)
        except FileExistsError:
            raise ConcurrentModification(f"{entry.asset} v{entry.version} was created concurrently") from None
        finally:
            os.unlink(tmp)
        self._write_index(entry.asset)

    def _write_index(self, asset: str) -> None:
        d = self._asset_dir(asset)
        history = []
        for v in self.versions(asset):
            e = self.get(asset, v)
            history.append({"version": v, "structural": e.fingerprints[0], "semantic": e.fingerprints[1]})
        index = {"asset": asset, "latest": history[-1]["version"], "history": history}
        tmp = _write_temp(d, _dump(index))
        os.replace(tmp, d / "index.json")

    def index(self, asset: str) -> dict:
        """Contents of ``index.json``; rebuilt if it lags behind the version files."""
        path = self._asset_dir(asset) / "index.json"
        latest = self.latest_version(asset)
        if latest is None:
            raise NotFound(f"asset {asset} is not registered")
        try:
            index = json.loads(path.read_bytes())
        except (FileNotFoundError, ValueError):
            index = None
        if index is None or index.get("latest") != latest:
            with self._lock(asset):
                self._write_index(asset)
            index = json.loads(path.read_bytes())
        return index


def _field_ids(schema: ResolvedSchema) -> set[tuple[str, int]]:
    return {
        (fqn, f.id)
        for fqn, t in schema.types.items() if isinstance(t, CompositeDef)
        for f in t.fields
    }
