"""Schema-checked record construction."""

from __future__ import annotations

from typing import Any, Optional

from .. import codec
from ..codec import Record
from ..errors import UnknownField, ValidationFailure
from ..model import ResolvedSchema


class RecordBuilder:
    """Stages field values for one struct, checking each against the schema.

    ``set`` rejects undeclared names, values of the wrong type, and values
    that break a ``@Validate`` rule, so a complete builder always encodes.
    Enum fields accept the symbolic name or the number; struct fields accept
    a :class:`Record` or a name-keyed mapping.
    """

    def __init__(self, schema: ResolvedSchema, version: int, type_fqn: Optional[str] = None):
        self.schema = schema
        self.version = version
        self.type_fqn = type_fqn or schema.root
        self._def = schema.composite(self.type_fqn)
        self._values: dict[int, Any] = {}

    @classmethod
    def for_asset(cls, registry, asset: str, version: Optional[int] = None) -> RecordBuilder:
        entry = registry.get(asset) if version is None else registry.get(asset, version)
        return cls(entry.schema, entry.version)

    def set(self, name: str, value: Any) -> RecordBuilder:
        f = self._def.field_named(name)
        if f is None:
            raise UnknownField(f"{self.type_fqn} has no field {name!r}")
        path = f"{self.type_fqn}.{name}"
        value = codec.coerce(value, f.type, self.schema, path)
        codec.check_value(value, f.type, self.schema, path)
        violations = codec.validate_value(Record(self.type_fqn, {f.id: value}), self.schema)
        if violations:
            raise ValidationFailure(violations)
        self._values[f.id] = value
        return self

    def update(self, **values: Any) -> RecordBuilder:
        for name, value in values.items():
            self.set(name, value)
        return self

    def unset(self, name: str) -> RecordBuilder:
        f = self._def.field_named(name)
        if f is None:
            raise UnknownField(f"{self.type_fqn} has no field {name!r}")
        self._values.pop(f.id, None)
        return self

    def record(self) -> Record:
        return Record(self.type_fqn, dict(self._values))

    def encode(self) -> bytes:
        return codec.encode(self.record(), self.schema, self.version)

    def __repr__(self) -> str:
        staged = ", ".join(self._def.field(i).name for i in sorted(self._values))
        return f"RecordBuilder({self.type_fqn} v{self.version}: {staged})"
