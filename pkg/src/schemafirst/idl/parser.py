"""Recursive-descent parser producing :class:`AstDocument` trees."""

from __future__ import annotations

from pathlib import Path
from typing import Optional

from ..errors import CycleDetected, ParseError
from .ast import (
    CONTAINERS,
    PRIMITIVES,
    AstAnnotation,
    AstComposite,
    AstDocument,
    AstEnum,
    AstField,
    AstTypedef,
    SourcePos,
    Symbol,
    TypeExpr,
)
from .lexer import PUNCTUATION, Token, tokenize

MAX_FIELD_ID = 32767

_NAME_KINDS = ("ident", "path")
_SYMBOL = {kind: f"'{ch}'" for ch, kind in PUNCTUATION.items()}


class _Parser:
    def __init__(self, tokens: list[Token], file: str, source: str):
        self.tokens = tokens
        self.i = 0
        self.file = file
        lines = source.split("\n")
        self.eof_pos = SourcePos(file, len(lines), len(lines[-1]) + 1)

    # -- token helpers -------------------------------------------------------

    def peek(self, ahead: int = 0) -> Optional[Token]:
        j = self.i + ahead
        return self.tokens[j] if j < len(self.tokens) else None

    def at(self, kind: str, value=None) -> bool:
        tok = self.peek()
        return tok is not None and tok.kind == kind and (value is None or tok.value == value)

    def fail(self, message: str, expected=()) -> ParseError:
        tok = self.peek()
        pos = tok.pos if tok else self.eof_pos
        found = f"{tok.kind} {tok.value!r}" if tok else "end of input"
        return ParseError(f"{message}, found {found}", pos, expected)

    def expect(self, kind: str, value=None, what: Optional[str] = None) -> Token:
        if not self.at(kind, value):
            label = value if value is not None else _SYMBOL.get(kind, kind)
            raise self.fail(f"expected {what or label}", [str(label)])
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def accept(self, kind: str, value=None) -> Optional[Token]:
        if self.at(kind, value):
            tok = self.tokens[self.i]
            self.i += 1
            return tok
        return None

    def name(self, what: str, dotted: bool = False) -> Token:
        kinds = _NAME_KINDS if dotted else ("ident",)
        tok = self.peek()
        if tok is None or tok.kind not in kinds:
            raise self.fail(f"expected {what}", kinds)
        self.i += 1
        return tok

    def skip_separator(self):
        if not self.accept("comma"):
            self.accept("semi")

    # -- grammar -------------------------------------------------------------

    def document(self) -> AstDocument:
        namespace = None
        includes: list[str] = []
        while self.at("kw", "namespace") or self.at("kw", "include"):
            tok = self.tokens[self.i]
            self.i += 1
            if tok.value == "namespace":
                if namespace is not None:
                    raise ParseError("duplicate namespace declaration", tok.pos)
                namespace = self.name("namespace name", dotted=True).value
            else:
                includes.append(self.expect("string", what="include path").value)
            self.accept("semi")
        if namespace is None:
            raise self.fail("expected namespace declaration", ["namespace"])

        definitions = []
        seen: dict[str, SourcePos] = {}
        while self.peek() is not None:
            definition = self.definition()
            if definition.name in seen:
                raise ParseError(f"duplicate definition {definition.name!r}", definition.pos)
            seen[definition.name] = definition.pos
            definitions.append(definition)
        return AstDocument(namespace, tuple(includes), tuple(definitions), file=self.file)

    def definition(self):
        annotations = self.annotations()
        tok = self.peek()
        if tok is None or tok.kind != "kw" or tok.value not in ("typedef", "enum", "struct"):
            raise self.fail("expected definition", ["typedef", "enum", "struct", "@"])
        self.i += 1
        if tok.value == "typedef":
            base = self.type_expr()
            name = self.name("typedef name").value
            node = AstTypedef(name, base, annotations, pos=tok.pos)
        elif tok.value == "enum":
            node = self.enum(annotations, tok.pos)
        else:
            node = self.struct(annotations, tok.pos)
        self.accept("semi")
        return node

    def enum(self, annotations, pos) -> AstEnum:
        name = self.name("enum name").value
        self.expect("lbrace")
        values: list[tuple[str, int]] = []
        names, numbers = set(), set()
        while not self.accept("rbrace"):
            if self.peek() is None:
                raise self.fail("unterminated enum", ["}"])
            entry = self.name("enum value name")
            self.expect("eq")
            number = self.expect("int", what="enum value").value
            if entry.value in names:
                raise ParseError(f"duplicate enum value name {entry.value!r}", entry.pos)
            if number in numbers:
                raise ParseError(f"duplicate enum value {number}", entry.pos)
            names.add(entry.value)
            numbers.add(number)
            values.append((entry.value, number))
            self.skip_separator()
        return AstEnum(name, tuple(values), annotations, pos=pos)

    def struct(self, annotations, pos) -> AstComposite:
        name = self.name("struct name").value
        embeds: list[str] = []
        if self.accept("kw", "embeds"):
            embeds.append(self.name("embedded type", dotted=True).value)
            while self.accept("comma"):
                embeds.append(self.name("embedded type", dotted=True).value)
        self.expect("lbrace")
        fields: list[AstField] = []
        ids: set[int] = set()
        names: set[str] = set()
        while not self.accept("rbrace"):
            if self.peek() is None:
                raise self.fail("unterminated struct", ["}"])
            f = self.field()
            if f.id in ids:
                raise ParseError(f"duplicate field id {f.id} in {name}", f.pos)
            if f.name in names:
                raise ParseError(f"duplicate field name {f.name!r} in {name}", f.pos)
            ids.add(f.id)
            names.add(f.name)
            fields.append(f)
        return AstComposite(name, tuple(fields), annotations, tuple(embeds), pos=pos)

    def field(self) -> AstField:
        annotations = self.annotations()
        if not self.at("int"):
            raise self.fail("expected field id", ["int", "@", "}"])
        id_tok = self.tokens[self.i]
        self.i += 1
        if not 1 <= id_tok.value <= MAX_FIELD_ID:
            raise ParseError(f"field id {id_tok.value} outside 1..{MAX_FIELD_ID}", id_tok.pos)
        self.expect("colon")
        optional = self.accept("kw", "optional") is not None
        ftype = self.type_expr()
        name = self.name("field name").value
        self.skip_separator()
        return AstField(id_tok.value, name, ftype, optional, annotations, pos=id_tok.pos)

    def type_expr(self) -> TypeExpr:
        tok = self.name("type", dotted=True)
        if tok.value in CONTAINERS:
            what = f"'>' closing {tok.value}<...>"
            self.expect("lt", what=f"'<' after {tok.value}")
            args = [self.type_expr()]
            if tok.value == "map":
                self.expect("comma", what="',' between map key and value types")
                args.append(self.type_expr())
            self.expect("gt", what=what)
            return TypeExpr(tok.value, tuple(args))
        return TypeExpr(tok.value)

    def annotations(self) -> tuple[AstAnnotation, ...]:
        out = []
        while self.at("at"):
            out.append(self.annotation())
        return tuple(out)

    def annotation(self) -> AstAnnotation:
        at = self.expect("at")
        name = self.name("annotation name", dotted=True).value
        args: list = []
        if self.accept("lbrace"):
            while not self.accept("rbrace"):
                if args:
                    self.expect("comma")
                    if self.accept("rbrace"):
                        break
                key = None
                if self.at("ident") and self.peek(1) is not None and self.peek(1).kind == "eq":
                    key_tok = self.tokens[self.i]
                    key = key_tok.value
                    self.i += 2
                    if any(k == key for k, _ in args):
                        raise ParseError(f"duplicate annotation key {key!r}", key_tok.pos)
                elif args:
                    raise self.fail("positional annotation argument must come first", ["key="])
                args.append((key, self.literal()))
        return AstAnnotation(name, tuple(args), pos=at.pos)

    def literal(self):
        tok = self.peek()
        if tok is None:
            raise self.fail("expected literal", ["string", "int", "ident"])
        if tok.kind == "string":
            parts = []
            while self.at("string"):
                parts.append(self.tokens[self.i].value)
                self.i += 1
            return "".join(parts)
        self.i += 1
        if tok.kind == "int":
            return tok.value
        if tok.kind in _NAME_KINDS:
            return Symbol(tok.value)
        self.i -= 1
        raise self.fail("expected literal", ["string", "int", "ident"])


def parse(source: str, file: str = "<memory>") -> AstDocument:
    """Parse one IDL source text into an :class:`AstDocument`."""
    return _Parser(tokenize(source, file), file, source).document()


def parse_file(path) -> AstDocument:
    path = Path(path)
    return parse(path.read_text(encoding="utf-8"), str(path))


def read_sources(path) -> tuple[str, dict[str, str]]:
    """Read ``path`` and, transitively, every file it includes.

    Returns the main text and a mapping of include path (as written) to
    text.  Include paths are relative to the including file.
    """
    path = Path(path)
    texts: dict[str, str] = {}

    def visit(p: Path, stack: tuple[Path, ...]):
        doc = parse_file(p)
        for inc in doc.includes:
            target = (p.parent / inc).resolve()
            if target in stack:
                raise CycleDetected(f"include cycle through {target}")
            texts.setdefault(inc, target.read_text(encoding="utf-8"))
            visit(target, stack + (target,))

    visit(path, (path.resolve(),))
    return path.read_text(encoding="utf-8"), texts


def load_documents(path) -> list[AstDocument]:
    """Parse ``path`` and its includes; the main document comes first."""
    main, texts = read_sources(path)
    return documents_from_texts(main, texts, str(path))


def documents_from_texts(main: str, includes: dict[str, str], file: str = "<memory>") -> list[AstDocument]:
    """Parse a main document plus included documents keyed by include path."""
    docs = [parse(main, file)]
    seen = set()
    queue = list(docs[0].includes)
    while queue:
        inc = queue.pop(0)
        if inc in seen:
            continue
        seen.add(inc)
        if inc not in includes:
            raise ParseError(f"included file {inc!r} not provided", SourcePos(file, 1, 1))
        doc = parse(includes[inc], inc)
        docs.append(doc)
        queue.extend(doc.includes)
    return docs


def parse_type(text: str) -> TypeExpr:
    """Parse a standalone type expression such as ``map<string, i64>``."""
    p = _Parser(tokenize(text, "<type>"), "<type>", text)
    t = p.type_expr()
    if p.peek() is not None:
        raise p.fail("trailing input after type")
    return t


def parse_annotation(text: str) -> AstAnnotation:
    """Parse a standalone annotation such as ``@Unit{"ms"}``."""
    p = _Parser(tokenize(text, "<annotation>"), "<annotation>", text)
    ann = p.annotation()
    if p.peek() is not None:
        raise p.fail("trailing input after annotation")
    return ann
