"""Schema version diffing, compatibility rulings and rename migrations.

Fields are matched by id within each type fqn; names are secondary.  Every
change the differ emits gets exactly one ruling from the rule table in
:func:`classify`.
"""

from __future__ import annotations

import enum
import json
from dataclasses import asdict, dataclass, field
from typing import Any, Iterable, Mapping, Optional, Sequence

from .errors import BreakingNotTransformable, RootMismatch, TransformGap
from .model import CompositeDef, EnumDef, FieldDef, ResolvedSchema, RichType


class ChangeKind(str, enum.Enum):
    AddField = "AddField"
    RemoveField = "RemoveField"
    RenameField = "RenameField"
    ChangeFieldType = "ChangeFieldType"
    ChangeOptionality = "ChangeOptionality"
    ReuseFieldId = "ReuseFieldId"
    AddEnumValue = "AddEnumValue"
    RemoveEnumValue = "RemoveEnumValue"
    RenameEnumValue = "RenameEnumValue"
    ChangeSemanticType = "ChangeSemanticType"
    ChangeUnit = "ChangeUnit"
    ChangeValidation = "ChangeValidation"
    MetadataOnly = "MetadataOnly"


@dataclass(frozen=True)
class Change:
    kind: ChangeKind
    type_fqn: str
    field_id: Optional[int] = None
    before: Optional[str] = None
    after: Optional[str] = None

    @property
    def subject(self) -> str:
        return self.type_fqn if self.field_id is None else f"{self.type_fqn}#{self.field_id}"

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "type": self.type_fqn,
            "field_id": self.field_id,
            "before": self.before,
            "after": self.after,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> Change:
        return cls(ChangeKind(d["kind"]), d["type"], d.get("field_id"), d.get("before"), d.get("after"))

    def __str__(self) -> str:
        delta = ""
        if self.before is not None or self.after is not None:
            delta = f": {self.before} -> {self.after}"
        return f"{self.kind.value} {self.subject}{delta}"


@dataclass(frozen=True)
class Ruling:
    change: Change
    ruling: str  # "compatible" | "breaking"
    rule: str


@dataclass(frozen=True)
class Verdict:
    outcome: str  # "compatible" | "breaking"
    rulings: tuple[Ruling, ...] = ()

    @property
    def breaking(self) -> bool:
        return self.outcome == "breaking"

    @property
    def changes(self) -> list[Change]:
        return [r.change for r in self.rulings]

    def to_dict(self) -> dict:
        return {
            "outcome": self.outcome,
            "rulings": [
                {"change": r.change.to_dict(), "ruling": r.ruling, "rule": r.rule} for r in self.rulings
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> Verdict:
        return cls(
            d["outcome"],
            tuple(Ruling(Change.from_dict(r["change"]), r["ruling"], r["rule"]) for r in d["rulings"]),
        )


COMPATIBLE = Verdict("compatible")


# -- diff --------------------------------------------------------------------


def _field_text(f: FieldDef) -> str:
    return f"{f.id}: {'optional ' if f.optional else ''}{f.type} {f.name}"


def _quals(f: FieldDef) -> str:
    return ",".join(sorted(str(q) for q in f.qualifiers)) or "-"


def _diff_fields(old: ResolvedSchema, new: ResolvedSchema, fqn: str, a: FieldDef, b: FieldDef) -> list[Change]:
    out = []
    if a.name != b.name:
        out.append(Change(ChangeKind.RenameField, fqn, a.id, a.name, b.name))
    wa, wb = old.wire_type(a.type), new.wire_type(b.type)
    if wa != wb:
        out.append(Change(ChangeKind.ChangeFieldType, fqn, a.id, str(wa), str(wb)))
    if a.optional != b.optional:
        out.append(Change(ChangeKind.ChangeOptionality, fqn, a.id,
                          "optional" if a.optional else "required",
                          "optional" if b.optional else "required"))
    if a.semantic_type != b.semantic_type:
        out.append(Change(ChangeKind.ChangeSemanticType, fqn, a.id, a.semantic_type, b.semantic_type))
    elif a.qualifiers != b.qualifiers:
        out.append(Change(ChangeKind.ChangeSemanticType, fqn, a.id, _quals(a), _quals(b)))
    elif a.semantic_type and a.rich_type != b.rich_type:
        # same semantic type, different representation (e.g. short name -> FQDN)
        out.append(Change(ChangeKind.ChangeSemanticType, fqn, a.id, a.rich_type, b.rich_type))
    if a.unit != b.unit:
        out.append(Change(ChangeKind.ChangeUnit, fqn, a.id, a.unit, b.unit))
    if a.validate_regex != b.validate_regex:
        out.append(Change(ChangeKind.ChangeValidation, fqn, a.id, a.validate_regex, b.validate_regex))
    if not out and a != b:
        out.append(Change(ChangeKind.MetadataOnly, fqn, a.id))
    return out


def _diff_rich(fqn: str, a: RichType, b: RichType) -> list[Change]:
    out = []
    if a.base != b.base:
        out.append(Change(ChangeKind.ChangeFieldType, fqn, None, a.base, b.base))
    if a.semantic_type != b.semantic_type:
        out.append(Change(ChangeKind.ChangeSemanticType, fqn, None, a.semantic_type, b.semantic_type))
    if a.unit != b.unit:
        out.append(Change(ChangeKind.ChangeUnit, fqn, None, a.unit, b.unit))
    if a.validate_regex != b.validate_regex:
        out.append(Change(ChangeKind.ChangeValidation, fqn, None, a.validate_regex, b.validate_regex))
    if not out and a != b:
        out.append(Change(ChangeKind.MetadataOnly, fqn))
    return out


def _diff_enum(fqn: str, a: EnumDef, b: EnumDef) -> list[Change]:
    out = []
    old = {v: n for n, v in a.values}
    new = {v: n for n, v in b.values}
    for v in sorted(old.keys() | new.keys()):
        if v not in new:
            out.append(Change(ChangeKind.RemoveEnumValue, fqn, v, old[v], None))
        elif v not in old:
            out.append(Change(ChangeKind.AddEnumValue, fqn, v, None, new[v]))
        elif old[v] != new[v]:
            out.append(Change(ChangeKind.RenameEnumValue, fqn, v, old[v], new[v]))
    if not out and a != b:
        out.append(Change(ChangeKind.MetadataOnly, fqn))
    return out


def _diff_composite(old: ResolvedSchema, new: ResolvedSchema, fqn: str, a: CompositeDef, b: CompositeDef,
                    retired: frozenset) -> list[Change]:
    out = []
    fa = {f.id: f for f in a.fields}
    fb = {f.id: f for f in b.fields}
    for fid in sorted(fa.keys() | fb.keys()):
        if fid not in fb:
            out.append(Change(ChangeKind.RemoveField, fqn, fid, _field_text(fa[fid]), None))
        elif fid not in fa:
            kind = ChangeKind.ReuseFieldId if (fqn, fid) in retired else ChangeKind.AddField
            out.append(Change(kind, fqn, fid, None, _field_text(fb[fid])))
        else:
            out.extend(_diff_fields(old, new, fqn, fa[fid], fb[fid]))
    shallow = ("embeds", "is_qualifier", "display_name", "description", "privacy", "extras")
    if any(getattr(a, k) != getattr(b, k) for k in shallow):
        out.append(Change(ChangeKind.MetadataOnly, fqn))
    return out


def diff(old: ResolvedSchema, new: ResolvedSchema, retired: Iterable[tuple[str, int]] = ()) -> list[Change]:
    """Classifiable differences between two versions of one asset's schema.

    ``retired`` lists ``(type fqn, field id)`` pairs used by some earlier
    version and since removed; re-adding one is reported as ReuseFieldId.
    """
    if old.root != new.root:
        raise RootMismatch(f"cannot diff {old.root} against {new.root}")
    retired = frozenset(retired)
    out: list[Change] = []
    for fqn in sorted(old.types.keys() & new.types.keys()):
        a, b = old.types[fqn], new.types[fqn]
        if a.kind != b.kind:
            out.append(Change(ChangeKind.ChangeFieldType, fqn, None, a.kind, b.kind))
        elif isinstance(a, CompositeDef):
            out.extend(_diff_composite(old, new, fqn, a, b, retired))
        elif isinstance(a, EnumDef):
            out.extend(_diff_enum(fqn, a, b))
        else:
            out.extend(_diff_rich(fqn, a, b))
    return out


# -- classify ----------------------------------------------------------------


def _rule(change: Change, allow_removals: bool) -> tuple[str, str]:
    k = change.kind
    if k is ChangeKind.AddField:
        return "compatible", "add-field-fresh-id"
    if k is ChangeKind.RemoveField:
        if allow_removals:
            return "compatible", "remove-field-allowed"
        return "breaking", "remove-field"
    if k is ChangeKind.RenameField:
        return "compatible", "rename-field-same-id"
    if k is ChangeKind.ChangeFieldType:
        return "breaking", "change-field-type"
    if k is ChangeKind.ChangeOptionality:
        if change.after == "required":
            return "breaking", "optional-to-required"
        return "compatible", "required-to-optional"
    if k is ChangeKind.ReuseFieldId:
        return "breaking", "reuse-field-id"
    if k is ChangeKind.AddEnumValue:
        return "compatible", "add-enum-value"
    if k is ChangeKind.RemoveEnumValue:
        return "breaking", "remove-enum-value"
    if k is ChangeKind.RenameEnumValue:
        return "compatible", "rename-enum-value"
    if k is ChangeKind.ChangeSemanticType:
        return "breaking", "change-semantic-type"
    if k is ChangeKind.ChangeUnit:
        return "breaking", "change-unit"
    if k is ChangeKind.ChangeValidation:
        if change.after is None:
            return "compatible", "validation-removed"
        return "breaking", "validation-changed"
    if k is ChangeKind.MetadataOnly:
        return "compatible", "metadata-only"
    raise AssertionError(k)  # pragma: no cover


def classify(changes: Sequence[Change], old: Optional[ResolvedSchema] = None,
             new: Optional[ResolvedSchema] = None, *, allow_removals: bool = False) -> Verdict:
    """Apply the rule table; the verdict is breaking iff any ruling is."""
    rulings = tuple(Ruling(c, *_rule(c, allow_removals)) for c in changes)
    outcome = "breaking" if any(r.ruling == "breaking" for r in rulings) else "compatible"
    return Verdict(outcome, rulings)


def check(old: ResolvedSchema, new: ResolvedSchema, retired=(), *, allow_removals: bool = False) -> Verdict:
    return classify(diff(old, new, retired), old, new, allow_removals=allow_removals)


# -- transforms --------------------------------------------------------------


@dataclass(frozen=True)
class FieldRename:
    type: str
    field_id: int
    old: str
    new: str


@dataclass(frozen=True)
class EnumRename:
    enum: str
    value: int
    old: str
    new: str


@dataclass(frozen=True)
class MigrationTransform:
    from_version: int
    to_version: int
    field_renames: tuple[FieldRename, ...] = ()
    enum_renames: tuple[EnumRename, ...] = ()
    asset: Optional[str] = field(default=None)

    @property
    def empty(self) -> bool:
        return not (self.field_renames or self.enum_renames)

    def inverse(self) -> MigrationTransform:
        return MigrationTransform(
            self.to_version,
            self.from_version,
            tuple(FieldRename(r.type, r.field_id, r.new, r.old) for r in self.field_renames),
            tuple(EnumRename(r.enum, r.value, r.new, r.old) for r in self.enum_renames),
            self.asset,
        )

    def then(self, nxt: MigrationTransform) -> MigrationTransform:
        """Compose ``self`` (a -> b) with ``nxt`` (b -> c) into a -> c."""
        if self.to_version != nxt.from_version:
            raise TransformGap(f"cannot compose {self.from_version}->{self.to_version} "
                               f"with {nxt.from_version}->{nxt.to_version}")
        fields = {(r.type, r.field_id): r for r in self.field_renames}
        for r in nxt.field_renames:
            prev = fields.get((r.type, r.field_id))
            fields[(r.type, r.field_id)] = FieldRename(r.type, r.field_id, prev.old if prev else r.old, r.new)
        enums = {(r.enum, r.value): r for r in self.enum_renames}
        for r in nxt.enum_renames:
            prev = enums.get((r.enum, r.value))
            enums[(r.enum, r.value)] = EnumRename(r.enum, r.value, prev.old if prev else r.old, r.new)
        return MigrationTransform(
            self.from_version,
            nxt.to_version,
            tuple(r for _, r in sorted(fields.items()) if r.old != r.new),
            tuple(r for _, r in sorted(enums.items()) if r.old != r.new),
            self.asset or nxt.asset,
        )

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> MigrationTransform:
        return cls(
            d["from_version"],
            d["to_version"],
            tuple(FieldRename(**r) for r in d.get("field_renames", ())),
            tuple(EnumRename(**r) for r in d.get("enum_renames", ())),
            d.get("asset"),
        )


def build_transforms(changes: Sequence[Change], from_version: int, to_version: int,
                     asset: Optional[str] = None, *, allow_removals: bool = False) -> MigrationTransform:
    """Collect the rename changes of a compatible change set into a transform."""
    verdict = classify(changes, allow_removals=allow_removals)
    if verdict.breaking:
        raise BreakingNotTransformable(f"change set {from_version}->{to_version} is breaking")
    fields = tuple(
        FieldRename(c.type_fqn, c.field_id, c.before, c.after)
        for c in changes if c.kind is ChangeKind.RenameField
    )
    enums = tuple(
        EnumRename(c.type_fqn, c.field_id, c.before, c.after)
        for c in changes if c.kind is ChangeKind.RenameEnumValue
    )
    return MigrationTransform(from_version, to_version, fields, enums, asset)


def _chain(from_version: int, to_version: int, transforms: Iterable[MigrationTransform]) -> list[MigrationTransform]:
    """Steps leading from ``from_version`` to ``to_version``, inverted when going down.

    Transforms may span several versions (see :meth:`MigrationTransform.then`);
    at each version the longest step that does not overshoot is taken.
    """
    spans = {}
    for t in transforms:
        if t.from_version > t.to_version:
            t = t.inverse()
        spans[(t.from_version, t.to_version)] = t
    steps = []
    v = from_version
    while v != to_version:
        if to_version > v:
            options = [t for (a, b), t in spans.items() if a == v and b <= to_version]
            step = max(options, key=lambda t: t.to_version, default=None)
        else:
            options = [t for (a, b), t in spans.items() if b == v and a >= to_version]
            step = min(options, key=lambda t: t.from_version, default=None)
            step = step.inverse() if step is not None else None
        if step is None:
            raise TransformGap(f"no transform leaving v{v} toward v{to_version}")
        steps.append(step)
        v = step.to_version
    return steps


def migrate_record(record: Mapping[str, Any], from_version: int, to_version: int,
                   transforms: Iterable[MigrationTransform],
                   schemas: Optional[Mapping[int, ResolvedSchema]] = None) -> dict:
    """Upgrade or downgrade a name-keyed record across schema versions.

    Renames are applied forward when upgrading and inverted when
    downgrading; values and unknown keys pass through untouched.  Without
    ``schemas`` only renames of the transform's root type apply (at the top
    level).  With ``schemas`` (version -> schema) nested structs and enum
    symbols are migrated as well.
    """
    steps = _chain(from_version, to_version, list(transforms))
    out = dict(record)
    version = from_version
    for step in steps:
        schema = schemas.get(version) if schemas else None
        root = schema.root if schema is not None else step.asset
        out = _apply(out, root, step, schema)
        version = step.to_version
    return out


def _apply(record: Mapping[str, Any], type_fqn: Optional[str], step: MigrationTransform,
           schema: Optional[ResolvedSchema]) -> dict:
    renames = {r.old: r.new for r in step.field_renames if type_fqn is None or r.type == type_fqn}
    comp = None
    if schema is not None and type_fqn is not None and isinstance(schema.types.get(type_fqn), CompositeDef):
        comp = schema.types[type_fqn]
    out = {}
    for key, value in record.items():
        if comp is not None:
            f = comp.field_named(key)
            if f is not None:
                value = _apply_value(value, schema.wire_type(f.type), step, schema)
        out[renames.get(key, key)] = value
    return out


def _apply_value(value, wire, step: MigrationTransform, schema: ResolvedSchema):
    t = schema.types.get(wire.name)
    if isinstance(t, CompositeDef) and isinstance(value, Mapping):
        return _apply(value, t.fqn, step, schema)
    if isinstance(t, EnumDef) and isinstance(value, str):
        for r in step.enum_renames:
            if r.enum == t.fqn and r.old == value:
                return r.new
        return value
    if wire.name == "list" and isinstance(value, list):
        return [_apply_value(v, wire.args[0], step, schema) for v in value]
    if wire.name == "map" and isinstance(value, Mapping):
        return {k: _apply_value(v, wire.args[1], step, schema) for k, v in value.items()}
    return value
