"""HTTP client with the same read/write surface as :class:`SchemaStore`."""

from __future__ import annotations

import json
import urllib.error
import urllib.request
from typing import Mapping, Optional, Union
from urllib.parse import quote, urlencode

from ..compat import MigrationTransform, Verdict
from ..errors import (
    BreakingRejected,
    ConcurrentModification,
    InvalidDocument,
    NotFound,
    RegistryError,
    UnknownAsset,
    UnknownVersion,
)
from ..model import ResolvedSchema
from .store import LATEST, AssetSummary, SemanticHit, VersionEntry


class RegistryClient:
    def __init__(self, base_url: str, timeout: float = 30.0):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self._schemas: dict[tuple[str, int], ResolvedSchema] = {}

    def _request(self, method: str, path: str, body: Optional[dict] = None):
        data = None if body is None else json.dumps(body).encode("utf-8")
        req = urllib.request.Request(self.base_url + path, data=data, method=method)
        if data is not None:
            req.add_header("content-type", "application/json")
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                return resp.status, json.loads(resp.read())
        except urllib.error.HTTPError as exc:
            try:
                payload = json.loads(exc.read())
            except ValueError:
                payload = {"error": exc.reason}
            message = payload.get("error", str(exc.reason)) if isinstance(payload, dict) else str(payload)
            if exc.code == 404:
                raise NotFound(message) from None
            if exc.code == 409:
                raise ConcurrentModification(message) from None
            if exc.code == 422:
                raise BreakingRejected(Verdict.from_dict(payload["verdict"])) from None
            if exc.code == 400:
                raise InvalidDocument(message) from None
            raise RegistryError(f"HTTP {exc.code}: {message}") from None
        except urllib.error.URLError as exc:
            raise RegistryError(f"cannot reach registry at {self.base_url}: {exc.reason}") from None

    def actualize(self, asset: str, document: str, author: str = "", expected_parent: Optional[int] = None,
                  includes: Optional[Mapping[str, str]] = None, *, allow_removals: bool = False,
                  ) -> tuple[int, Verdict]:
        body = {"document": document, "author": author, "includes": dict(includes or {}),
                "allow_removals": allow_removals}
        if expected_parent is not None:
            body["expected_parent"] = expected_parent
        _, out = self._request("PUT", f"/assets/{quote(asset, safe='')}", body)
        return out["version"], Verdict.from_dict(out["verdict"])

    def get(self, asset: str, selector: Union[int, str] = LATEST) -> VersionEntry:
        tail = "latest" if selector == LATEST else f"versions/{int(selector)}"
        _, out = self._request("GET", f"/assets/{quote(asset, safe='')}/{tail}")
        return VersionEntry.from_dict(out)

    def latest_version(self, asset: str) -> Optional[int]:
        try:
            return self.get(asset).version
        except NotFound:
            return None

    def schema_for(self, asset: str, version: int) -> ResolvedSchema:
        key = (asset, version)
        if key not in self._schemas:
            try:
                self._schemas[key] = self.get(asset, version).schema
            except NotFound:
                if self.latest_version(asset) is None:
                    raise UnknownAsset(f"asset {asset} is not registered") from None
                raise UnknownVersion(f"asset {asset} has no version {version}") from None
        return self._schemas[key]

    def list_assets(self, q: Optional[str] = None, semantic_type: Optional[str] = None) -> list[AssetSummary]:
        params = {k: v for k, v in (("q", q), ("semantic_type", semantic_type)) if v}
        _, out = self._request("GET", "/assets" + (f"?{urlencode(params)}" if params else ""))
        return [AssetSummary(a["asset"], a["latest"], a["display_name"]) for a in out]

    def search_semantic(self, semid: str) -> list[SemanticHit]:
        _, out = self._request("GET", f"/semantic-types/{quote(semid, safe='')}/fields")
        return [SemanticHit(h["asset"], h["path"], tuple(h["qualifiers"]), h["rich_type"], h["semantic_type"])
                for h in out]

    def assets(self) -> list[str]:
        return [a.asset for a in self.list_assets()]

    def transform_chain(self, asset: str, from_version: int, to_version: int) -> list[MigrationTransform]:
        query = urlencode({"from": from_version, "to": to_version})
        _, out = self._request("GET", f"/assets/{quote(asset, safe='')}/transforms?{query}")
        return [MigrationTransform.from_dict(t) for t in out]
