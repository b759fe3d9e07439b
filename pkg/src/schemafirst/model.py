"""Resolved schema model.

:func:`resolve` turns parsed IDL documents into a :class:`ResolvedSchema`:
names are fully qualified, typedef chains are collapsed into
:class:`RichType` records, annotations are interpreted into typed metadata,
and embedded composites are flattened into their embedding struct.

Only types reachable from the root composite end up in the schema, so
unrelated definitions sharing a file never perturb an asset's fingerprint.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from typing import Any, ClassVar, Iterable, Mapping, Optional, Sequence, Union

from . import fingerprint as fp
from .errors import (
    ConflictingAnnotation,
    CycleDetected,
    DuplicateFieldAfterFlatten,
    InvalidAnnotation,
    InvalidType,
    SchemaError,
    UnresolvedName,
)
from .idl import (
    PRIMITIVES,
    AstAnnotation,
    AstComposite,
    AstDocument,
    AstEnum,
    AstField,
    AstTypedef,
    Symbol,
    TypeExpr,
    parse_annotation,
    parse_type,
    render_annotation,
)

NUMERIC = ("i32", "i64", "double")
CONVERSIONS = ("truncate_at_first_dot", "identity")

BUILTIN_ANNOTATIONS = frozenset(
    {
        "DisplayName",
        "Description",
        "SemanticType",
        "SemanticQualifier",
        "Unit",
        "Validate",
        "Privacy",
        "Measurement",
        "Converts",
        "AllowedOps",
    }
)
# where each built-in may appear
_ALLOWED_ON = {
    "typedef": {"DisplayName", "Description", "SemanticType", "Unit", "Validate", "Privacy",
                "Measurement", "Converts", "AllowedOps"},
    "field": {"DisplayName", "Description", "SemanticType", "Unit", "Validate", "Privacy", "Measurement"},
    "struct": {"DisplayName", "Description", "SemanticQualifier", "Privacy"},
    "enum": {"DisplayName", "Description"},
}
_REPEATABLE = frozenset({"Converts"})
_DOTTED = re.compile(r"[A-Za-z_][A-Za-z0-9_]*(\.[A-Za-z_][A-Za-z0-9_]*)*\Z")


@dataclass(frozen=True)
class Privacy:
    category: str
    retention_days: Optional[int] = None


@dataclass(frozen=True)
class ConversionDecl:
    target: str
    how: str
    invertible: bool = False


@dataclass(frozen=True)
class Qualifier:
    type: str
    value: str

    def __str__(self) -> str:
        return f"{self.type}={self.value}"


@dataclass(frozen=True)
class RichType:
    fqn: str
    base: str
    alias_of: Optional[str] = None
    display_name: Optional[str] = None
    description: Optional[str] = None
    semantic_type: Optional[str] = None
    unit: Optional[str] = None
    validate_regex: Optional[str] = None
    conversions: tuple[ConversionDecl, ...] = ()
    privacy: Optional[Privacy] = None
    measurement: bool = False
    allowed_ops: tuple[str, ...] = ("eq",)
    extras: tuple[AstAnnotation, ...] = ()
    kind: ClassVar[str] = "typedef"


@dataclass(frozen=True)
class EnumDef:
    fqn: str
    values: tuple[tuple[str, int], ...]
    display_name: Optional[str] = None
    description: Optional[str] = None
    extras: tuple[AstAnnotation, ...] = ()
    kind: ClassVar[str] = "enum"

    def name_of(self, number: int) -> Optional[str]:
        return next((n for n, v in self.values if v == number), None)

    def number_of(self, name: str) -> Optional[int]:
        return next((v for n, v in self.values if n == name), None)


@dataclass(frozen=True)
class FieldDef:
    id: int
    name: str
    type: TypeExpr
    optional: bool = False
    display_name: Optional[str] = None
    description: Optional[str] = None
    semantic_type: Optional[str] = None
    rich_type: Optional[str] = None
    unit: Optional[str] = None
    validate_regex: Optional[str] = None
    qualifiers: tuple[Qualifier, ...] = ()
    privacy: Optional[Privacy] = None
    measurement: bool = False
    origin: str = ""
    extras: tuple[AstAnnotation, ...] = ()


@dataclass(frozen=True)
class CompositeDef:
    fqn: str
    fields: tuple[FieldDef, ...]
    embeds: tuple[str, ...] = ()
    is_qualifier: bool = False
    display_name: Optional[str] = None
    description: Optional[str] = None
    privacy: Optional[Privacy] = None
    extras: tuple[AstAnnotation, ...] = ()
    kind: ClassVar[str] = "struct"

    def field(self, field_id: int) -> Optional[FieldDef]:
        return next((f for f in self.fields if f.id == field_id), None)

    def field_named(self, name: str) -> Optional[FieldDef]:
        return next((f for f in self.fields if f.name == name), None)


TypeDef = Union[RichType, EnumDef, CompositeDef]


@dataclass(frozen=True)
class SemanticField:
    path: str
    ids: tuple[int, ...]
    semantic_type: str
    qualifiers: tuple[Qualifier, ...]
    rich_type: Optional[str]


@dataclass(frozen=True)
class ResolvedSchema:
    root: str
    types: Mapping[str, TypeDef]
    fingerprint_structural: int = 0
    fingerprint_semantic: int = 0
    lints: tuple[str, ...] = field(default=(), compare=False)

    @property
    def root_def(self) -> CompositeDef:
        return self.composite(self.root)

    def type(self, fqn: str) -> TypeDef:
        try:
            return self.types[fqn]
        except KeyError:
            raise UnresolvedName(f"no type {fqn!r} in schema {self.root}") from None

    def composite(self, fqn: str) -> CompositeDef:
        t = self.type(fqn)
        if not isinstance(t, CompositeDef):
            raise InvalidType(f"{fqn} is a {t.kind}, not a struct")
        return t

    def rich_types(self) -> dict[str, RichType]:
        return {k: v for k, v in self.types.items() if isinstance(v, RichType)}

    def wire_type(self, t: TypeExpr) -> TypeExpr:
        """Expand typedefs so only primitives, containers, enums and structs remain."""
        if t.args:
            return TypeExpr(t.name, tuple(self.wire_type(a) for a in t.args))
        if t.name in PRIMITIVES:
            return t
        td = self.type(t.name)
        if isinstance(td, RichType):
            return TypeExpr(td.base)
        return t

    def fingerprints(self) -> tuple[int, int]:
        return self.fingerprint_structural, self.fingerprint_semantic

    def to_dict(self) -> dict:
        return {
            "root": self.root,
            "types": {fqn: _typedef_to_dict(t) for fqn, t in sorted(self.types.items())},
            "fingerprints": {
                "structural": f"{self.fingerprint_structural:016x}",
                "semantic": f"{self.fingerprint_semantic:016x}",
            },
            "lints": list(self.lints),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, ensure_ascii=False)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> ResolvedSchema:
        types = {fqn: _typedef_from_dict(fqn, d) for fqn, d in data["types"].items()}
        structural, semantic = fp.fingerprints(data["root"], types)
        return cls(data["root"], types, structural, semantic, tuple(data.get("lints", ())))


# -- JSON helpers ------------------------------------------------------------


def _extras_out(extras) -> list[str]:
    return [render_annotation(a) for a in extras]


def _extras_in(items) -> tuple[AstAnnotation, ...]:
    return tuple(parse_annotation(s) for s in items)


def _privacy_out(p: Optional[Privacy]):
    return None if p is None else {"category": p.category, "retention_days": p.retention_days}


def _privacy_in(d) -> Optional[Privacy]:
    return None if d is None else Privacy(d["category"], d.get("retention_days"))


def _typedef_to_dict(t: TypeDef) -> dict:
    if isinstance(t, RichType):
        return {
            "kind": "typedef",
            "base": t.base,
            "alias_of": t.alias_of,
            "display_name": t.display_name,
            "description": t.description,
            "semantic_type": t.semantic_type,
            "unit": t.unit,
            "validate": t.validate_regex,
            "conversions": [
                {"target": c.target, "how": c.how, "invertible": c.invertible} for c in t.conversions
            ],
            "privacy": _privacy_out(t.privacy),
            "measurement": t.measurement,
            "allowed_ops": list(t.allowed_ops),
            "extras": _extras_out(t.extras),
        }
    if isinstance(t, EnumDef):
        return {
            "kind": "enum",
            "values": [[n, v] for n, v in t.values],
            "display_name": t.display_name,
            "description": t.description,
            "extras": _extras_out(t.extras),
        }
    return {
        "kind": "struct",
        "fields": [_field_to_dict(f) for f in sorted(t.fields, key=lambda f: f.id)],
        "order": [f.id for f in t.fields],
        "embeds": list(t.embeds),
        "qualifier": t.is_qualifier,
        "display_name": t.display_name,
        "description": t.description,
        "privacy": _privacy_out(t.privacy),
        "extras": _extras_out(t.extras),
    }


def _field_to_dict(f: FieldDef) -> dict:
    return {
        "id": f.id,
        "name": f.name,
        "type": str(f.type),
        "optional": f.optional,
        "display_name": f.display_name,
        "description": f.description,
        "semantic_type": f.semantic_type,
        "rich_type": f.rich_type,
        "unit": f.unit,
        "validate": f.validate_regex,
        "qualifiers": [[q.type, q.value] for q in f.qualifiers],
        "privacy": _privacy_out(f.privacy),
        "measurement": f.measurement,
        "origin": f.origin,
        "extras": _extras_out(f.extras),
    }


def _typedef_from_dict(fqn: str, d: Mapping[str, Any]) -> TypeDef:
    kind = d["kind"]
    if kind == "typedef":
        return RichType(
            fqn=fqn,
            base=d["base"],
            alias_of=d.get("alias_of"),
            display_name=d.get("display_name"),
            description=d.get("description"),
            semantic_type=d.get("semantic_type"),
            unit=d.get("unit"),
            validate_regex=d.get("validate"),
            conversions=tuple(
                ConversionDecl(c["target"], c["how"], c["invertible"]) for c in d.get("conversions", ())
            ),
            privacy=_privacy_in(d.get("privacy")),
            measurement=d.get("measurement", False),
            allowed_ops=tuple(d.get("allowed_ops", ("eq",))),
            extras=_extras_in(d.get("extras", ())),
        )
    if kind == "enum":
        return EnumDef(
            fqn=fqn,
            values=tuple((n, v) for n, v in d["values"]),
            display_name=d.get("display_name"),
            description=d.get("description"),
            extras=_extras_in(d.get("extras", ())),
        )
    if kind == "struct":
        by_id = {f["id"]: f for f in d["fields"]}
        order = d.get("order") or sorted(by_id)
        fields = tuple(
            FieldDef(
                id=f["id"],
                name=f["name"],
                type=parse_type(f["type"]),
                optional=f["optional"],
                display_name=f.get("display_name"),
                description=f.get("description"),
                semantic_type=f.get("semantic_type"),
                rich_type=f.get("rich_type"),
                unit=f.get("unit"),
                validate_regex=f.get("validate"),
                qualifiers=tuple(Qualifier(t, v) for t, v in f.get("qualifiers", ())),
                privacy=_privacy_in(f.get("privacy")),
                measurement=f.get("measurement", False),
                origin=f.get("origin", fqn),
                extras=_extras_in(f.get("extras", ())),
            )
            for f in (by_id[i] for i in order)
        )
        return CompositeDef(
            fqn=fqn,
            fields=fields,
            embeds=tuple(d.get("embeds", ())),
            is_qualifier=d.get("qualifier", False),
            display_name=d.get("display_name"),
            description=d.get("description"),
            privacy=_privacy_in(d.get("privacy")),
            extras=_extras_in(d.get("extras", ())),
        )
    raise SchemaError(f"unknown type kind {kind!r} for {fqn}")


# -- resolution --------------------------------------------------------------


def _text(ann: AstAnnotation, *keys: Optional[str], required: bool = True) -> Optional[str]:
    value = ann.get(*keys)
    if value is None:
        if required:
            raise InvalidAnnotation(f"{ann.pos}: @{ann.name} needs a value")
        return None
    if isinstance(value, int):
        raise InvalidAnnotation(f"{ann.pos}: @{ann.name} expects text, got {value!r}")
    return str(value)


def _flag(ann: AstAnnotation, key: str, default: bool) -> bool:
    value = ann.get(key)
    if value is None:
        return default
    if isinstance(value, Symbol) and value.path in ("true", "false"):
        return value.path == "true"
    if isinstance(value, int) and value in (0, 1):
        return bool(value)
    raise InvalidAnnotation(f"{ann.pos}: @{ann.name}: {key} must be true or false")


class _Resolver:
    def __init__(self, docs: Sequence[AstDocument]):
        self.defs: dict[str, tuple[AstDocument, Any]] = {}
        for doc in docs:
            for d in doc.definitions:
                fqn = f"{doc.namespace}.{d.name}"
                if fqn in self.defs:
                    raise SchemaError(f"{d.pos}: {fqn} defined more than once")
                self.defs[fqn] = (doc, d)
        self.done: dict[str, TypeDef] = {}
        self.stack: list[str] = []
        self.lints: list[str] = []

    # names

    def lookup(self, name: str, doc: AstDocument, pos=None) -> Optional[str]:
        if name in self.defs and "." in name:
            return name
        local = f"{doc.namespace}.{name}"
        if local in self.defs:
            return local
        hits = sorted(fqn for fqn in self.defs if fqn.endswith("." + name))
        if len(hits) == 1:
            return hits[0]
        if len(hits) > 1:
            raise UnresolvedName(f"{pos or doc.file}: {name!r} is ambiguous: {', '.join(hits)}")
        return None

    def require(self, name: str, doc: AstDocument, pos) -> str:
        fqn = self.lookup(name, doc, pos)
        if fqn is None:
            raise UnresolvedName(f"{pos}: unresolved name {name!r}")
        return fqn

    def get(self, fqn: str) -> TypeDef:
        if fqn in self.done:
            return self.done[fqn]
        if fqn in self.stack:
            cycle = " -> ".join(self.stack[self.stack.index(fqn):] + [fqn])
            raise CycleDetected(f"type cycle: {cycle}")
        self.stack.append(fqn)
        try:
            doc, d = self.defs[fqn]
            if isinstance(d, AstTypedef):
                result = self.typedef(fqn, doc, d)
            elif isinstance(d, AstEnum):
                result = self.enum(fqn, doc, d)
            else:
                result = self.composite(fqn, doc, d)
        finally:
            self.stack.pop()
        self.done[fqn] = result
        return result

    def type_expr(self, t: TypeExpr, doc: AstDocument, pos) -> TypeExpr:
        if t.name in ("list", "map"):
            want = 1 if t.name == "list" else 2
            if len(t.args) != want:
                raise InvalidType(f"{pos}: {t.name} takes {want} type argument(s)")
            return TypeExpr(t.name, tuple(self.type_expr(a, doc, pos) for a in t.args))
        if t.args:
            raise InvalidType(f"{pos}: {t.name} takes no type arguments")
        if t.name in PRIMITIVES:
            return t
        fqn = self.require(t.name, doc, pos)
        target = self.get(fqn)
        if isinstance(target, CompositeDef) and target.is_qualifier:
            raise InvalidType(f"{pos}: qualifier type {fqn} cannot be used as a field type")
        return TypeExpr(fqn)

    # annotations

    def split(self, annotations: Iterable[AstAnnotation], where: str, doc: AstDocument):
        """Partition into built-ins (by name), qualifier annotations and extras."""
        builtins: dict[str, list[AstAnnotation]] = {}
        qualifiers: list[tuple[str, AstAnnotation]] = []
        extras: list[AstAnnotation] = []
        seen: set[str] = set()
        for ann in annotations:
            if ann.name in seen and ann.name not in _REPEATABLE:
                raise ConflictingAnnotation(f"{ann.pos}: @{ann.name} given twice")
            seen.add(ann.name)
            if ann.name in BUILTIN_ANNOTATIONS:
                if ann.name not in _ALLOWED_ON[where]:
                    raise InvalidAnnotation(f"{ann.pos}: @{ann.name} is not allowed on a {where}")
                builtins.setdefault(ann.name, []).append(ann)
                continue
            try:
                fqn = self.lookup(ann.name, doc, ann.pos) if where == "field" else None
            except UnresolvedName:
                fqn = None
            if fqn is not None:
                target = self.get(fqn)
                if isinstance(target, CompositeDef) and target.is_qualifier:
                    qualifiers.append((fqn, ann))
                    continue
            extras.append(ann)
        return builtins, qualifiers, tuple(extras)

    def common(self, builtins: dict[str, list[AstAnnotation]]) -> dict[str, Any]:
        out: dict[str, Any] = {}
        if "DisplayName" in builtins:
            out["display_name"] = _text(builtins["DisplayName"][0], None, "name")
        if "Description" in builtins:
            out["description"] = _text(builtins["Description"][0], None, "name", "text")
        if "SemanticType" in builtins:
            ann = builtins["SemanticType"][0]
            sem = _text(ann, None, "name", "id")
            if not _DOTTED.match(sem):
                raise InvalidAnnotation(f"{ann.pos}: semantic type {sem!r} is not a dotted identifier")
            out["semantic_type"] = sem
        if "Unit" in builtins:
            unit = _text(builtins["Unit"][0], None, "name")
            if not unit.strip():
                raise InvalidAnnotation(f"{builtins['Unit'][0].pos}: @Unit must be nonempty")
            out["unit"] = unit
        if "Validate" in builtins:
            ann = builtins["Validate"][0]
            regex = _text(ann, "regex", None)
            try:
                re.compile(regex)
            except re.error as exc:
                raise InvalidAnnotation(f"{ann.pos}: bad @Validate regex {regex!r}: {exc}") from None
            out["validate_regex"] = regex
        if "Privacy" in builtins:
            ann = builtins["Privacy"][0]
            days = ann.get("retention_days")
            if days is not None and (not isinstance(days, int) or days < 0):
                raise InvalidAnnotation(f"{ann.pos}: retention_days must be a non-negative integer")
            out["privacy"] = Privacy(_text(ann, "category", None), days)
        if "Measurement" in builtins:
            out["measurement"] = True
        return out

    # definitions

    def typedef(self, fqn: str, doc: AstDocument, d: AstTypedef) -> RichType:
        builtins, _, extras = self.split(d.annotations, "typedef", doc)
        meta = self.common(builtins)
        alias_of = None
        if d.base.name in PRIMITIVES and not d.base.args:
            base = d.base.name
            inherited: dict[str, Any] = {}
        elif d.base.args or d.base.name in ("list", "map"):
            raise InvalidType(f"{d.pos}: typedef {fqn} must alias a primitive or another typedef")
        else:
            alias_of = self.require(d.base.name, doc, d.pos)
            parent = self.get(alias_of)
            if not isinstance(parent, RichType):
                raise InvalidType(f"{d.pos}: typedef {fqn} aliases {parent.kind} {alias_of}")
            base = parent.base
            inherited = {
                k: getattr(parent, k)
                for k in ("display_name", "description", "semantic_type", "unit", "validate_regex",
                          "privacy", "measurement", "allowed_ops")
            }
        conversions = []
        for ann in builtins.get("Converts", ()):
            target = self.require(_text(ann, "to", None), doc, ann.pos)
            how = _text(ann, "how", required=False) or "identity"
            if how not in CONVERSIONS:
                raise InvalidAnnotation(f"{ann.pos}: unknown conversion {how!r}")
            invertible = _flag(ann, "invertible", how == "identity")
            if invertible and how != "identity":
                raise InvalidAnnotation(f"{ann.pos}: {how} is not invertible")
            conversions.append(ConversionDecl(target, how, invertible))
        if "AllowedOps" in builtins:
            ann = builtins["AllowedOps"][0]
            raw = ann.get(None, "ops", "name")
            ops = [s.strip() for s in str(raw or "").split(",") if s.strip()]
            if not ops:
                raise InvalidAnnotation(f"{ann.pos}: @AllowedOps needs at least one operator")
            meta["allowed_ops"] = tuple(ops)
        merged = {**inherited, **meta}
        if merged.get("measurement") and base not in NUMERIC:
            raise InvalidAnnotation(f"{d.pos}: @Measurement on non-numeric typedef {fqn}")
        return RichType(fqn=fqn, base=base, alias_of=alias_of, conversions=tuple(conversions),
                        extras=extras, **merged)

    def enum(self, fqn: str, doc: AstDocument, d: AstEnum) -> EnumDef:
        builtins, _, extras = self.split(d.annotations, "enum", doc)
        return EnumDef(fqn, d.values, extras=extras, **self.common(builtins))

    def composite(self, fqn: str, doc: AstDocument, d: AstComposite) -> CompositeDef:
        builtins, _, extras = self.split(d.annotations, "struct", doc)
        meta = self.common(builtins)
        is_qualifier = "SemanticQualifier" in builtins

        fields: list[FieldDef] = []
        embeds = []
        for name in d.embeds:
            efqn = self.require(name, doc, d.pos)
            embedded = self.get(efqn)
            if not isinstance(embedded, CompositeDef):
                raise InvalidType(f"{d.pos}: {fqn} embeds {embedded.kind} {efqn}")
            embeds.append(efqn)
            fields.extend(embedded.fields)
        fields.extend(self.field(fqn, doc, f) for f in d.fields)

        ids: dict[int, FieldDef] = {}
        names: dict[str, FieldDef] = {}
        for f in fields:
            for key, seen, what in ((f.id, ids, "id"), (f.name, names, "name")):
                if key in seen:
                    other = seen[key]
                    raise DuplicateFieldAfterFlatten(
                        f"{fqn}: field {what} {key!r} from {f.origin} collides with {other.origin}"
                    )
                seen[key] = f
        if is_qualifier and not any(isinstance(self.done.get(f.type.name), EnumDef) for f in fields):
            raise InvalidAnnotation(f"{d.pos}: qualifier {fqn} needs an enum-typed field")
        return CompositeDef(fqn, tuple(fields), tuple(embeds), is_qualifier, extras=extras, **meta)

    def field(self, owner: str, doc: AstDocument, f: AstField) -> FieldDef:
        ftype = self.type_expr(f.type, doc, f.pos)
        builtins, qual_anns, extras = self.split(f.annotations, "field", doc)
        own = self.common(builtins)
        rich = self.done.get(ftype.name) if not ftype.args else None
        rich = rich if isinstance(rich, RichType) else None
        inherited = {}
        if rich is not None:
            inherited = {
                k: getattr(rich, k)
                for k in ("display_name", "description", "semantic_type", "unit", "validate_regex",
                          "privacy", "measurement")
            }
            if own.get("semantic_type") and rich.semantic_type and own["semantic_type"] != rich.semantic_type:
                self.lints.append(
                    f"{f.pos}: field {owner}.{f.name} overrides semantic type {rich.semantic_type} "
                    f"of {rich.fqn} with {own['semantic_type']}"
                )
        merged = {**inherited, **own}
        wire = ftype
        if rich is not None:
            wire = TypeExpr(rich.base)
        if merged.get("measurement") and wire.name not in NUMERIC:
            raise InvalidAnnotation(f"{f.pos}: @Measurement on non-numeric field {owner}.{f.name}")
        if merged.get("validate_regex") and wire.name != "string":
            raise InvalidAnnotation(f"{f.pos}: @Validate only applies to string fields")

        qualifiers = []
        for qfqn, ann in qual_anns:
            qualifiers.append(Qualifier(qfqn, self.qualifier_value(qfqn, ann)))
        return FieldDef(
            id=f.id,
            name=f.name,
            type=ftype,
            optional=f.optional,
            rich_type=rich.fqn if rich else None,
            qualifiers=tuple(qualifiers),
            origin=owner,
            extras=extras,
            **merged,
        )

    def qualifier_value(self, qfqn: str, ann: AstAnnotation) -> str:
        qdef = self.done[qfqn]
        enum = next(
            (self.done[f.type.name] for f in qdef.fields if isinstance(self.done.get(f.type.name), EnumDef)),
        )
        raw = ann.get(None, "value", "name")
        if raw is None:
            raise InvalidAnnotation(f"{ann.pos}: @{ann.name} needs a value of {enum.fqn}")
        if isinstance(raw, int):
            name = enum.name_of(raw)
        else:
            name = str(raw).rsplit(".", 1)[-1]
            name = name if enum.number_of(name) is not None else None
        if name is None:
            raise InvalidAnnotation(f"{ann.pos}: {raw} is not a value of {enum.fqn}")
        return name

    # reachability

    def collect(self, root: str) -> dict[str, TypeDef]:
        out: dict[str, TypeDef] = {}
        pending = [root]
        while pending:
            fqn = pending.pop()
            if fqn in out:
                continue
            t = self.get(fqn)
            out[fqn] = t
            if isinstance(t, RichType):
                if t.alias_of:
                    pending.append(t.alias_of)
                for c in t.conversions:
                    target = self.get(c.target)
                    if not isinstance(target, RichType):
                        raise InvalidAnnotation(f"{fqn}: conversion target {c.target} is not a typedef")
                    if target.semantic_type is None or target.semantic_type != t.semantic_type:
                        raise InvalidAnnotation(
                            f"{fqn}: conversion target {c.target} does not share semantic type {t.semantic_type}"
                        )
                    pending.append(c.target)
            elif isinstance(t, CompositeDef):
                pending.extend(t.embeds)
                for f in t.fields:
                    pending.extend(_named(f.type))
                    pending.extend(q.type for q in f.qualifiers)
        return out


def _named(t: TypeExpr) -> list[str]:
    if t.args:
        return [n for a in t.args for n in _named(a)]
    return [] if t.name in PRIMITIVES else [t.name]


def resolve(docs: Sequence[AstDocument], root_fqn: str) -> ResolvedSchema:
    """Resolve ``docs`` into the schema rooted at composite ``root_fqn``."""
    r = _Resolver(docs)
    if root_fqn not in r.defs:
        raise UnresolvedName(f"root type {root_fqn!r} is not defined")
    root = r.get(root_fqn)
    if not isinstance(root, CompositeDef) or root.is_qualifier:
        raise InvalidType(f"root {root_fqn} must be a struct")
    types = r.collect(root_fqn)
    structural, semantic = fp.fingerprints(root_fqn, types)
    return ResolvedSchema(root_fqn, types, structural, semantic, tuple(r.lints))


def flatten_fields(schema: ResolvedSchema, composite_fqn: str) -> list[FieldDef]:
    """Fields of ``composite_fqn`` with embedded composites inlined.

    Embedded fields keep their declaring type in ``origin``.  Resolution
    already flattens, so re-flattening is the identity on resolved input.
    """
    comp = schema.composite(composite_fqn)
    out: list[FieldDef] = []
    for efqn in comp.embeds:
        out.extend(flatten_fields(schema, efqn))
    inlined = {f.id for f in out}
    out.extend(f for f in comp.fields if f.id not in inlined or f.origin == comp.fqn)
    ids, names = set(), set()
    for f in out:
        if f.id in ids or f.name in names:
            raise DuplicateFieldAfterFlatten(f"{composite_fqn}: field {f.id}/{f.name} collides")
        ids.add(f.id)
        names.add(f.name)
    return out


def fingerprint(schema: ResolvedSchema) -> tuple[int, int]:
    """Recompute ``(structural, semantic)`` fingerprints of ``schema``."""
    return fp.fingerprints(schema.root, schema.types)


def semantic_fields(schema: ResolvedSchema) -> list[SemanticField]:
    """Every semantically typed field reachable from the root, nested structs included."""
    out: list[SemanticField] = []

    def walk(comp: CompositeDef, prefix: str, ids: tuple[int, ...]):
        for f in comp.fields:
            path = f"{prefix}{f.name}"
            if f.semantic_type:
                out.append(SemanticField(path, ids + (f.id,), f.semantic_type, f.qualifiers, f.rich_type))
            wire = schema.wire_type(f.type)
            if not wire.args and isinstance(schema.types.get(wire.name), CompositeDef):
                walk(schema.types[wire.name], path + ".", ids + (f.id,))

    walk(schema.root_def, "", ())
    return out


def resolve_text(text: str, root_fqn: str, includes: Optional[Mapping[str, str]] = None,
                 file: str = "<memory>") -> ResolvedSchema:
    """Parse ``text`` (plus included texts) and resolve it in one step."""
    from .idl import documents_from_texts

    return resolve(documents_from_texts(text, dict(includes or {}), file), root_fqn)


def replace_field(schema: ResolvedSchema, owner: str, field_id: int, **changes) -> ResolvedSchema:
    """Copy of ``schema`` with one field altered; fingerprints are recomputed."""
    comp = schema.composite(owner)
    fields = tuple(replace(f, **changes) if f.id == field_id else f for f in comp.fields)
    types = dict(schema.types)
    types[owner] = replace(comp, fields=fields)
    s, m = fp.fingerprints(schema.root, types)
    return ResolvedSchema(schema.root, types, s, m, schema.lints)
