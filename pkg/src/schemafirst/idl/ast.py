"""AST node types for the schema IDL.

Nodes are frozen dataclasses with tuple-valued children so that two ASTs
compare structurally.  Source positions are carried for diagnostics but do
not take part in equality.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

PRIMITIVES = ("bool", "i32", "i64", "double", "string", "binary")
CONTAINERS = ("list", "map")


@dataclass(frozen=True)
class SourcePos:
    file: str
    line: int
    column: int

    def __post_init__(self):
        if self.line < 1 or self.column < 1:
            raise ValueError(f"invalid source position {self.line}:{self.column}")

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.column}"


NOWHERE = SourcePos("<generated>", 1, 1)


@dataclass(frozen=True)
class Symbol:
    """A bare (possibly dotted) identifier used as an annotation value."""

    path: str

    def __str__(self) -> str:
        return self.path


Literal = Union[str, int, Symbol]


@dataclass(frozen=True)
class TypeExpr:
    """``name`` is a primitive, ``list``/``map``, or a (dotted) type name."""

    name: str
    args: tuple[TypeExpr, ...] = ()

    @property
    def is_primitive(self) -> bool:
        return self.name in PRIMITIVES and not self.args

    @property
    def is_container(self) -> bool:
        return self.name in CONTAINERS

    def __str__(self) -> str:
        if self.args:
            return f"{self.name}<{', '.join(str(a) for a in self.args)}>"
        return self.name


@dataclass(frozen=True)
class AstAnnotation:
    name: str
    args: tuple[tuple[Optional[str], Literal], ...] = ()
    pos: SourcePos = field(default=NOWHERE, compare=False, repr=False)

    def __post_init__(self):
        if not self.name:
            raise ValueError("annotation name must be nonempty")
        for i, (key, _) in enumerate(self.args):
            if key is None and i != 0:
                raise ValueError(f"@{self.name}: positional argument must come first")

    def get(self, *keys: Optional[str], default=None):
        """First argument whose key is in ``keys`` (``None`` matches positional)."""
        for key, value in self.args:
            if key in keys:
                return value
        return default


@dataclass(frozen=True)
class AstField:
    id: int
    name: str
    type: TypeExpr
    optional: bool = False
    annotations: tuple[AstAnnotation, ...] = ()
    pos: SourcePos = field(default=NOWHERE, compare=False, repr=False)


@dataclass(frozen=True)
class AstTypedef:
    name: str
    base: TypeExpr
    annotations: tuple[AstAnnotation, ...] = ()
    pos: SourcePos = field(default=NOWHERE, compare=False, repr=False)


@dataclass(frozen=True)
class AstEnum:
    name: str
    values: tuple[tuple[str, int], ...]
    annotations: tuple[AstAnnotation, ...] = ()
    pos: SourcePos = field(default=NOWHERE, compare=False, repr=False)


@dataclass(frozen=True)
class AstComposite:
    name: str
    fields: tuple[AstField, ...]
    annotations: tuple[AstAnnotation, ...] = ()
    embeds: tuple[str, ...] = ()
    pos: SourcePos = field(default=NOWHERE, compare=False, repr=False)

    def field_by_id(self, field_id: int) -> Optional[AstField]:
        return next((f for f in self.fields if f.id == field_id), None)


Definition = Union[AstTypedef, AstEnum, AstComposite]


@dataclass(frozen=True)
class AstDocument:
    namespace: str
    includes: tuple[str, ...] = ()
    definitions: tuple[Definition, ...] = ()
    file: str = field(default="<memory>", compare=False, repr=False)

    def __post_init__(self):
        if not self.namespace:
            raise ValueError("document namespace must be nonempty")

    def definition(self, name: str) -> Optional[Definition]:
        return next((d for d in self.definitions if d.name == name), None)
