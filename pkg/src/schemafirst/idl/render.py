"""Canonical pretty-printer: ``parse(render(doc)) == doc``."""

from __future__ import annotations

from .ast import AstAnnotation, AstComposite, AstDocument, AstEnum, AstTypedef, Symbol

_ESCAPE = str.maketrans({"\\": "\\\\", '"': '\\"', "\n": "\\n", "\t": "\\t", "\r": "\\r"})


def render_literal(value) -> str:
    if isinstance(value, Symbol):
        return value.path
    if isinstance(value, bool):
        raise TypeError("bool is not an annotation literal")
    if isinstance(value, int):
        return str(value)
    return '"' + value.translate(_ESCAPE) + '"'


def render_annotation(ann: AstAnnotation) -> str:
    if not ann.args:
        return f"@{ann.name}"
    parts = [render_literal(v) if k is None else f"{k}={render_literal(v)}" for k, v in ann.args]
    return f"@{ann.name}{{{', '.join(parts)}}}"


def _annotation_lines(annotations, indent: str) -> list[str]:
    return [indent + render_annotation(a) for a in annotations]


def render(doc: AstDocument) -> str:
    """Render ``doc`` as canonical IDL text."""
    lines = [f"namespace {doc.namespace}"]
    lines += [f'include "{render_literal(inc)[1:-1]}"' for inc in doc.includes]
    for d in doc.definitions:
        lines.append("")
        lines += _annotation_lines(d.annotations, "")
        if isinstance(d, AstTypedef):
            lines.append(f"typedef {d.base} {d.name}")
        elif isinstance(d, AstEnum):
            lines.append(f"enum {d.name} {{")
            lines += [f"  {name} = {number}," for name, number in d.values]
            lines.append("}")
        elif isinstance(d, AstComposite):
            embeds = f" embeds {', '.join(d.embeds)}" if d.embeds else ""
            lines.append(f"struct {d.name}{embeds} {{")
            for f in d.fields:
                lines += _annotation_lines(f.annotations, "  ")
                opt = "optional " if f.optional else ""
                lines.append(f"  {f.id}: {opt}{f.type} {f.name}")
            lines.append("}")
        else:  # pragma: no cover
            raise TypeError(f"unknown definition {d!r}")
    return "\n".join(lines) + "\n"
