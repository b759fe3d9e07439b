"""JSON-over-HTTP front end for :class:`SchemaStore`.

Routes::

    PUT /assets/{fqn}                          publish (201, 409, 422)
    GET /assets/{fqn}/versions/{n}             one version entry
    GET /assets/{fqn}/latest                   newest version entry
    GET /assets/{fqn}/transforms?from=&to=     migration chain
    GET /assets?q=&semantic_type=              asset listing
    GET /semantic-types/{semid}/fields         fields carrying a semantic type
"""

from __future__ import annotations

import json
import logging
import re
import threading
from http import HTTPStatus
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Optional
from urllib.parse import parse_qs, unquote, urlsplit

from ..errors import BreakingRejected, ConcurrentModification, InvalidDocument, NotFound, RegistryError
from .store import SchemaStore

log = logging.getLogger(__name__)

_ROUTES = [
    ("PUT", re.compile(r"/assets/([^/]+)"), "put_asset"),
    ("GET", re.compile(r"/assets/([^/]+)/versions/([0-9]+)"), "get_version"),
    ("GET", re.compile(r"/assets/([^/]+)/latest"), "get_latest"),
    ("GET", re.compile(r"/assets/([^/]+)/transforms"), "get_transforms"),
    ("GET", re.compile(r"/assets"), "list_assets"),
    ("GET", re.compile(r"/semantic-types/([^/]+)/fields"), "semantic_fields"),
]


class HttpError(Exception):
    def __init__(self, status: int, body: dict):
        super().__init__(body.get("error", ""))
        self.status = status
        self.body = body


class RegistryHandler(BaseHTTPRequestHandler):
    store: SchemaStore  # set on the subclass built by make_server
    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):
        log.debug("%s - " + fmt, self.address_string(), *args)

    def do_GET(self):
        self._dispatch("GET")

    def do_PUT(self):
        self._dispatch("PUT")

    def _dispatch(self, method: str):
        url = urlsplit(self.path)
        query = {k: v[-1] for k, v in parse_qs(url.query).items()}
        try:
            for m, pattern, name in _ROUTES:
                match = pattern.fullmatch(url.path)
                if match and m == method:
                    args = [unquote(a) for a in match.groups()]
                    status, body = getattr(self, name)(*args, query=query)
                    break
            else:
                allowed = any(p.fullmatch(url.path) for _, p, _ in _ROUTES)
                status = HTTPStatus.METHOD_NOT_ALLOWED if allowed else HTTPStatus.NOT_FOUND
                body = {"error": f"no route for {method} {url.path}"}
        except HttpError as exc:
            status, body = exc.status, exc.body
        except NotFound as exc:
            status, body = HTTPStatus.NOT_FOUND, {"error": str(exc), "kind": "NotFound"}
        except ConcurrentModification as exc:
            status, body = HTTPStatus.CONFLICT, {"error": str(exc), "kind": "ConcurrentModification"}
        except BreakingRejected as exc:
            status = HTTPStatus.UNPROCESSABLE_ENTITY
            body = {"error": str(exc), "kind": "BreakingRejected", "verdict": exc.verdict.to_dict()}
        except (InvalidDocument, RegistryError, ValueError) as exc:
            status, body = HTTPStatus.BAD_REQUEST, {"error": str(exc), "kind": type(exc).__name__}
        self._send(status, body)

    def _send(self, status: int, body):
        data = json.dumps(body, sort_keys=True).encode("utf-8")
        self.send_response(status)
        self.send_header("content-type", "application/json")
        self.send_header("content-length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def _body(self) -> dict:
        length = int(self.headers.get("content-length") or 0)
        try:
            body = json.loads(self.rfile.read(length) or b"{}")
        except ValueError as exc:
            raise HttpError(HTTPStatus.BAD_REQUEST, {"error": f"invalid JSON body: {exc}"}) from None
        if not isinstance(body, dict) or not isinstance(body.get("document"), str):
            raise HttpError(HTTPStatus.BAD_REQUEST, {"error": "body must be an object with a 'document' string"})
        return body

    # -- routes ------------------------------------------------------------------

    def put_asset(self, fqn, query):
        body = self._body()
        parent = body.get("expected_parent")
        before = self.store.latest_version(fqn)
        version, verdict = self.store.actualize(
            fqn,
            body["document"],
            author=str(body.get("author", "")),
            expected_parent=None if parent is None else int(parent),
            includes=body.get("includes") or {},
            allow_removals=bool(body.get("allow_removals", False)),
        )
        created = version != before
        status = HTTPStatus.CREATED if created else HTTPStatus.OK
        return status, {"version": version, "verdict": verdict.to_dict(), "created": created}

    def get_version(self, fqn, n, query):
        return HTTPStatus.OK, self.store.get(fqn, int(n)).to_dict()

    def get_latest(self, fqn, query):
        return HTTPStatus.OK, self.store.get(fqn).to_dict()

    def get_transforms(self, fqn, query):
        try:
            lo, hi = int(query["from"]), int(query["to"])
        except (KeyError, ValueError):
            raise HttpError(HTTPStatus.BAD_REQUEST, {"error": "from and to must be integers"}) from None
        return HTTPStatus.OK, [t.to_dict() for t in self.store.transform_chain(fqn, lo, hi)]

    def list_assets(self, query):
        items = self.store.list_assets(query.get("q") or None, query.get("semantic_type") or None)
        return HTTPStatus.OK, [a.to_dict() for a in items]

    def semantic_fields(self, semid, query):
        return HTTPStatus.OK, [h.to_dict() for h in self.store.search_semantic(semid)]


def make_server(store: SchemaStore, host: str = "127.0.0.1", port: int = 0) -> ThreadingHTTPServer:
    """Build (but do not start) a threaded HTTP server bound to ``host:port``."""
    handler = type("BoundRegistryHandler", (RegistryHandler,), {"store": store})
    server = ThreadingHTTPServer((host, port), handler)
    server.daemon_threads = True
    return server


class BackgroundServer:
    """Context manager running the registry service on a daemon thread."""

    def __init__(self, store: SchemaStore, host: str = "127.0.0.1", port: int = 0):
        self.server = make_server(store, host, port)
        self._thread: Optional[threading.Thread] = None

    @property
    def url(self) -> str:
        host, port = self.server.server_address[:2]
        return f"http://{host}:{port}"

    def __enter__(self) -> BackgroundServer:
        self._thread = threading.Thread(target=self.server.serve_forever, daemon=True)
        self._thread.start()
        return self

    def __exit__(self, *exc):
        self.server.shutdown()
        self.server.server_close()
        if self._thread is not None:
            self._thread.join()
