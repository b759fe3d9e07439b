"""Lexer, parser and pretty-printer for the annotated schema IDL (``.tsch``)."""

from .ast import (
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
from .lexer import Token, tokenize
from .parser import (
    documents_from_texts,
    load_documents,
    parse,
    parse_annotation,
    parse_file,
    parse_type,
    read_sources,
)
from .render import render, render_annotation

__all__ = [
    "PRIMITIVES",
    "AstAnnotation",
    "AstComposite",
    "AstDocument",
    "AstEnum",
    "AstField",
    "AstTypedef",
    "SourcePos",
    "Symbol",
    "Token",
    "TypeExpr",
    "documents_from_texts",
    "load_documents",
    "parse",
    "parse_annotation",
    "parse_file",
    "parse_type",
    "read_sources",
    "render",
    "render_annotation",
    "tokenize",
]
