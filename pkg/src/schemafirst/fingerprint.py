"""FNV-1a-64 fingerprints over canonical schema serializations.

Two views are hashed.  The structural view covers what decides wire shape
(root, field ids, names, types, optionality).  The semantic view adds the
machine-readable meaning: semantic types, qualifiers, units, validation,
privacy, measurement flags and conversions.  Display names, descriptions
and opaque annotations are in neither.
"""

from __future__ import annotations

import json
from typing import Any, Mapping

FNV64_OFFSET = 0xCBF29CE484222325
FNV64_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


def fnv1a_64(data: bytes) -> int:
    h = FNV64_OFFSET
    for b in data:
        h ^= b
        h = (h * FNV64_PRIME) & _MASK64
    return h


def canonical_bytes(obj: Any) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def _privacy(p) -> Any:
    return None if p is None else [p.category, p.retention_days]


def structural_view(root: str, types: Mapping[str, Any]) -> dict:
    out = []
    for fqn in sorted(types):
        t = types[fqn]
        if t.kind == "struct":
            fields = [
                {"id": f.id, "name": f.name, "type": str(f.type), "optional": f.optional}
                for f in sorted(t.fields, key=lambda f: f.id)
            ]
            out.append({"fqn": fqn, "kind": "struct", "fields": fields})
        elif t.kind == "enum":
            out.append({"fqn": fqn, "kind": "enum", "values": sorted([n, v] for n, v in t.values)})
        else:
            out.append({"fqn": fqn, "kind": "typedef", "base": t.base})
    return {"root": root, "types": out}


def semantic_view(root: str, types: Mapping[str, Any]) -> dict:
    view = structural_view(root, types)
    for entry in view["types"]:
        t = types[entry["fqn"]]
        if t.kind == "struct":
            entry["qualifier"] = t.is_qualifier
            by_id = {f.id: f for f in t.fields}
            for fe in entry["fields"]:
                f = by_id[fe["id"]]
                fe.update(
                    semantic_type=f.semantic_type,
                    qualifiers=[[q.type, q.value] for q in f.qualifiers],
                    unit=f.unit,
                    validate=f.validate_regex,
                    privacy=_privacy(f.privacy),
                    measurement=f.measurement,
                )
        elif t.kind == "typedef":
            entry.update(
                semantic_type=t.semantic_type,
                unit=t.unit,
                validate=t.validate_regex,
                privacy=_privacy(t.privacy),
                measurement=t.measurement,
                conversions=[[c.target, c.how, c.invertible] for c in t.conversions],
            )
    return view


def fingerprints(root: str, types: Mapping[str, Any]) -> tuple[int, int]:
    """Return ``(structural, semantic)`` 64-bit fingerprints."""
    return (
        fnv1a_64(canonical_bytes(structural_view(root, types))),
        fnv1a_64(canonical_bytes(semantic_view(root, types))),
    )
