"""Cross-asset queries over semantically typed fields.

The index maps each semantic type to the fields (in every registered
asset) that carry it.  Filters and joins address fields through the index
rather than by name, converting between representations of the same
semantic type where a ``@Converts`` declaration allows it.

Matching rule for filters: a record is kept when every indexed field of
its dataset that matches the filter (semantic type, plus qualifier when
one is given) holds a value equal to the literal after conversion.  An
absent optional value never equals the literal.
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Optional, Sequence, Union

from . import codec
from .codec import Record
from .errors import AmbiguousField, ConversionUnavailable, NotShared, SemanticQueryError
from .model import Qualifier, ResolvedSchema, RichType, semantic_fields

_ABSENT = object()


@dataclass(frozen=True)
class IndexEntry:
    semantic_type: str
    asset: str
    path: str
    ids: tuple[int, ...]
    rich_type: Optional[str]
    qualifiers: tuple[Qualifier, ...] = ()

    def to_dict(self) -> dict:
        return {
            "semantic_type": self.semantic_type,
            "asset": self.asset,
            "path": self.path,
            "rich_type": self.rich_type,
            "qualifiers": [str(q) for q in self.qualifiers],
        }


@dataclass(frozen=True)
class SemanticIndex:
    entries: Mapping[str, tuple[IndexEntry, ...]] = field(default_factory=dict)
    rich_types: Mapping[str, RichType] = field(default_factory=dict, compare=False)

    @classmethod
    def from_schemas(cls, schemas: Iterable[ResolvedSchema]) -> SemanticIndex:
        grouped: dict[str, list[IndexEntry]] = defaultdict(list)
        rich: dict[str, RichType] = {}
        for s in schemas:
            rich.update(s.rich_types())
            for sf in semantic_fields(s):
                grouped[sf.semantic_type].append(
                    IndexEntry(sf.semantic_type, s.root, sf.path, sf.ids, sf.rich_type, sf.qualifiers))
        entries = {k: tuple(sorted(v, key=lambda e: (e.asset, e.path))) for k, v in sorted(grouped.items())}
        return cls(entries, rich)

    def semids(self, asset: Optional[str] = None) -> list[str]:
        return [k for k, es in self.entries.items() if asset is None or any(e.asset == asset for e in es)]

    def fields(self, semid: str, asset: Optional[str] = None) -> list[IndexEntry]:
        return [e for e in self.entries.get(semid, ()) if asset is None or e.asset == asset]

    def all_entries(self) -> list[IndexEntry]:
        return [e for es in self.entries.values() for e in es]

    def to_dict(self) -> dict:
        return {k: [e.to_dict() for e in es] for k, es in self.entries.items()}


def build_index(registry) -> SemanticIndex:
    """Index the latest version of every asset in ``registry``."""
    return SemanticIndex.from_schemas(registry.get(a).schema for a in registry.assets())


def shared_dimensions(asset_a: str, asset_b: str, index: SemanticIndex) -> list[str]:
    b = set(index.semids(asset_b))
    return [s for s in index.semids(asset_a) if s in b]


# -- datasets ----------------------------------------------------------------


@dataclass(frozen=True)
class Dataset:
    asset: str
    version: int
    records: tuple[Record, ...]
    applicable: bool = True

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))

    def __len__(self) -> int:
        return len(self.records)

    @classmethod
    def from_queue(cls, paths: Union[str, Path, Sequence], registry, asset: Optional[str] = None) -> Dataset:
        """Decode queue-file frames of one asset; frames of other assets are ignored."""
        from .telemetry import QueueFile

        if isinstance(paths, (str, Path)):
            paths = [paths]
        records, version = [], None
        for p in paths:
            for payload in QueueFile(p).frames():
                d = codec.decode(payload, registry)
                if asset is None:
                    asset = d.asset
                if d.asset == asset:
                    records.append(d.record)
                    version = d.version if version is None else max(version, d.version)
        if asset is None:
            raise SemanticQueryError("empty queue and no asset given")
        return cls(asset, version or registry.get(asset).version, records)

    @classmethod
    def from_jsonl(cls, path: Union[str, Path], schema: ResolvedSchema, version: int) -> Dataset:
        """Load name-keyed JSON records, one per line (bytes as hex, enums by name)."""
        records = []
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if line.strip():
                records.append(codec.from_named(json.loads(line), schema, json_safe=True))
        return cls(schema.root, version, records)

    def to_jsonl(self, schema: ResolvedSchema) -> str:
        return "".join(json.dumps(codec.to_named(r, schema, json_safe=True), sort_keys=True) + "\n"
                       for r in self.records)


def field_value(record: Record, ids: Sequence[int]) -> Any:
    """Value at a field-id path, or ``_ABSENT``."""
    value: Any = record
    for fid in ids:
        if not isinstance(value, Record) or value.fields.get(fid) is None:
            return _ABSENT
        value = value.fields[fid]
    return value


# -- conversion --------------------------------------------------------------


def _rich(schemas, fqn: str) -> RichType:
    rich = schemas.rich_types if isinstance(schemas, SemanticIndex) else schemas
    try:
        return rich[fqn]
    except KeyError:
        raise SemanticQueryError(f"rich type {fqn} is not registered") from None


_HOW = {
    "identity": lambda v: v,
    "truncate_at_first_dot": lambda v: v.split(".", 1)[0],
}


def converter(from_rich: Optional[str], to_rich: Optional[str], schemas) -> Callable[[Any], Any]:
    """Function mapping values of one representation onto another (one hop at most)."""
    if from_rich == to_rich:
        return _HOW["identity"]
    if from_rich is None or to_rich is None:
        raise ConversionUnavailable(f"no conversion between {from_rich} and {to_rich}")
    src, dst = _rich(schemas, from_rich), _rich(schemas, to_rich)
    if src.semantic_type is None or src.semantic_type != dst.semantic_type:
        raise ConversionUnavailable(f"{from_rich} and {to_rich} do not share a semantic type")
    for c in src.conversions:
        if c.target == to_rich:
            return _HOW[c.how]
    for c in dst.conversions:
        if c.target == from_rich and c.invertible and c.how == "identity":
            return _HOW["identity"]
    raise ConversionUnavailable(f"no declared conversion from {from_rich} to {to_rich}")


def convert(value: Any, from_rich: Optional[str], to_rich: Optional[str], schemas) -> Any:
    return converter(from_rich, to_rich, schemas)(value)


# -- filtering and joining ---------------------------------------------------

QualifierArg = Union[Qualifier, str, None]


def _qualifier_matches(want: QualifierArg, quals: Sequence[Qualifier]) -> bool:
    if want is None:
        return True
    if isinstance(want, Qualifier):
        return want in quals
    if "=" in want:
        return any(str(q) == want for q in quals)
    return any(q.value == want for q in quals)


@dataclass(frozen=True)
class CrossFilter:
    semid: str
    value: Any
    rich_type: Optional[str]
    qualifier: QualifierArg = None


def cross_filter(datasets: Sequence[Dataset], flt: CrossFilter, index: SemanticIndex,
                 schemas=None) -> list[Dataset]:
    """Apply one equality predicate to every dataset field of the filter's semantic type.

    Datasets with no such field are returned unchanged and flagged as not
    applicable.
    """
    schemas = index if schemas is None else schemas
    if flt.rich_type is not None and _rich(schemas, flt.rich_type).semantic_type != flt.semid:
        raise SemanticQueryError(f"literal type {flt.rich_type} does not carry {flt.semid}")
    out = []
    for ds in datasets:
        matching = [e for e in index.fields(flt.semid, ds.asset) if _qualifier_matches(flt.qualifier, e.qualifiers)]
        if not matching:
            out.append(replace(ds, applicable=False))
            continue
        checks = [(e.ids, _literal_converter(e, flt, schemas)) for e in matching]
        kept = [r for r in ds.records if all(_equals(field_value(r, ids), conv, flt.value) for ids, conv in checks)]
        out.append(replace(ds, records=kept, applicable=True))
    return out


def _literal_converter(entry: IndexEntry, flt: CrossFilter, schemas) -> Callable[[Any], Any]:
    # an untyped literal is compared in each field's own representation
    if flt.rich_type is None:
        return _HOW["identity"]
    return converter(entry.rich_type, flt.rich_type, schemas)


def _equals(value, conv, literal) -> bool:
    return value is not _ABSENT and conv(value) == literal


def _join_field(ds: Dataset, semid: str, qualifier: QualifierArg, index: SemanticIndex) -> IndexEntry:
    candidates = [e for e in index.fields(semid, ds.asset) if _qualifier_matches(qualifier, e.qualifiers)]
    if not candidates:
        raise NotShared(f"{ds.asset} has no {semid} field" + (f" qualified {qualifier}" if qualifier else ""))
    if len(candidates) > 1:
        paths = ", ".join(e.path for e in candidates)
        raise AmbiguousField(f"{ds.asset} has several {semid} fields ({paths}); choose one with a qualifier")
    return candidates[0]


def semantic_join(a: Dataset, b: Dataset, semid: str, qualifier_pair: Optional[tuple[QualifierArg, QualifierArg]],
                  index: SemanticIndex, schemas=None) -> list[tuple[Record, Record]]:
    """Equi-join two datasets on their fields of one semantic type.

    Pairs come out in ``a`` order, then ``b`` order.  Values are compared in
    ``a``'s representation when ``b`` converts to it, else in ``b``'s.
    """
    schemas = index if schemas is None else schemas
    if semid not in shared_dimensions(a.asset, b.asset, index):
        raise NotShared(f"{semid} is not a dimension of both {a.asset} and {b.asset}")
    qa, qb = qualifier_pair or (None, None)
    fa, fb = _join_field(a, semid, qa, index), _join_field(b, semid, qb, index)
    try:
        conv_a, conv_b = _HOW["identity"], converter(fb.rich_type, fa.rich_type, schemas)
    except ConversionUnavailable:
        conv_a, conv_b = converter(fa.rich_type, fb.rich_type, schemas), _HOW["identity"]
    by_key: dict[Any, list[Record]] = defaultdict(list)
    for rb in b.records:
        v = field_value(rb, fb.ids)
        if v is not _ABSENT:
            by_key[conv_b(v)].append(rb)
    out = []
    for ra in a.records:
        v = field_value(ra, fa.ids)
        if v is not _ABSENT:
            out.extend((ra, rb) for rb in by_key.get(conv_a(v), ()))
    return out
