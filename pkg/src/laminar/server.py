"""HTTP facade over the registry, search and execution engine.

:meth:`App.dispatch` is a plain ``(method, path, headers, body) -> (status,
document)`` function so it can be tested without sockets; :func:`serve`
wraps it in a threaded stdlib HTTP server.

Every non-2xx reply carries an ApiError document::

    {"type": str, "code": int, "failedParameters": {...}, "details": str}
"""

from __future__ import annotations

import base64
import binascii
import json
import logging
import os
import re
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Any, Callable
from urllib.parse import parse_qs, unquote, urlsplit

from .behaviors import Catalog
from .dataflow import PEDescriptor, WorkflowGraph
from .engine import Engine
from .errors import (
    DecodeError,
    InvalidDescriptor,
    LaminarError,
    RouteNotFound,
    Unauthorized,
    ValidationError,
)
from .peformat import parse_pe_source, scan_imports
from .registry import Registry
from .search import HttpProvider, registry_search

log = logging.getLogger(__name__)

ROUTES: tuple[tuple[str, str], ...] = (
    ("POST", "/registry/{user}/pe/add"),
    ("GET", "/registry/{user}/pe/all"),
    ("GET", "/registry/{user}/pe/id/{id}"),
    ("GET", "/registry/{user}/pe/name/{name}"),
    ("DELETE", "/registry/{user}/pe/remove/id/{id}"),
    ("DELETE", "/registry/{user}/pe/remove/name/{name}"),
    ("POST", "/registry/{user}/workflow/add"),
    ("GET", "/registry/{user}/workflow/all"),
    ("GET", "/registry/{user}/workflow/id/{id}"),
    ("GET", "/registry/{user}/workflow/name/{name}"),
    ("GET", "/registry/{user}/workflow/pes/id/{id}"),
    ("GET", "/registry/{user}/workflow/pes/name/{name}"),
    ("DELETE", "/registry/{user}/workflow/remove/id/{id}"),
    ("DELETE", "/registry/{user}/workflow/remove/name/{name}"),
    ("PUT", "/registry/{user}/workflow/{workflowId}/pe/{peId}"),
    ("POST", "/execution/{user}/run"),
    ("GET", "/registry/{user}/all"),
    ("GET", "/registry/{user}/search/{search}/type/{type}"),
    ("GET", "/auth/all"),
    ("POST", "/auth/login"),
    ("POST", "/auth/register"),
)

_PLACEHOLDER = re.compile(r"\{(\w+)\}")


def _compile(template: str) -> re.Pattern:
    literals = _PLACEHOLDER.split(template)
    pattern = "".join(re.escape(part) if i % 2 == 0 else f"(?P<{part}>[^/]+)"
                      for i, part in enumerate(literals))
    return re.compile(f"^{pattern}$")


def serialize_payload(value: str | bytes) -> str:
    data = value.encode("utf-8") if isinstance(value, str) else value
    return base64.b64encode(data).decode("ascii")


def deserialize_payload(s: str) -> str:
    try:
        return base64.b64decode(s, validate=True).decode("utf-8")
    except (binascii.Error, ValueError, TypeError) as exc:
        raise DecodeError(f"payload is not valid base64 text: {exc}") from None


def _int(value: str, name: str) -> int:
    try:
        return int(value)
    except (TypeError, ValueError):
        raise ValidationError(f"{name} must be an integer", **{name: value}) from None


class App:
    def __init__(self, registry: Registry | None = None, engine: Engine | None = None,
                 catalog: Catalog | None = None):
        if catalog is None:
            from .showcase import default_catalog
            catalog = default_catalog()
        self.registry = registry or Registry()
        self.engine = engine or Engine(catalog)
        handlers: dict[tuple[str, str], Callable] = {
            ("POST", "/registry/{user}/pe/add"): self.add_pe,
            ("GET", "/registry/{user}/pe/all"): self.all_pes,
            ("GET", "/registry/{user}/pe/id/{id}"): self.get_pe,
            ("GET", "/registry/{user}/pe/name/{name}"): self.get_pe,
            ("DELETE", "/registry/{user}/pe/remove/id/{id}"): self.remove_pe,
            ("DELETE", "/registry/{user}/pe/remove/name/{name}"): self.remove_pe,
            ("POST", "/registry/{user}/workflow/add"): self.add_workflow,
            ("GET", "/registry/{user}/workflow/all"): self.all_workflows,
            ("GET", "/registry/{user}/workflow/id/{id}"): self.get_workflow,
            ("GET", "/registry/{user}/workflow/name/{name}"): self.get_workflow,
            ("GET", "/registry/{user}/workflow/pes/id/{id}"): self.pes_by_workflow,
            ("GET", "/registry/{user}/workflow/pes/name/{name}"): self.pes_by_workflow,
            ("DELETE", "/registry/{user}/workflow/remove/id/{id}"): self.remove_workflow,
            ("DELETE", "/registry/{user}/workflow/remove/name/{name}"): self.remove_workflow,
            ("PUT", "/registry/{user}/workflow/{workflowId}/pe/{peId}"): self.link,
            ("POST", "/execution/{user}/run"): self.run,
            ("GET", "/registry/{user}/all"): self.all_records,
            ("GET", "/registry/{user}/search/{search}/type/{type}"): self.search,
            ("GET", "/auth/all"): self.all_users,
            ("POST", "/auth/login"): self.login,
            ("POST", "/auth/register"): self.register,
        }
        self._routes = [(m, t, _compile(t), handlers[(m, t)]) for m, t in ROUTES]

    def route_table(self) -> list[tuple[str, str]]:
        return [(m, t) for m, t, _, _ in self._routes]

    # ------------------------------------------------------- dispatch

    def dispatch(self, method: str, path: str, headers: dict[str, str] | None = None,
                 body: bytes | str | dict | None = None) -> tuple[int, Any]:
        try:
            return self._dispatch(method.upper(), path, headers or {}, body)
        except LaminarError as exc:
            return exc.status, exc.to_api_error()
        except Exception as exc:  # noqa: BLE001 - every failure must become an ApiError
            log.exception("unhandled error on %s %s", method, path)
            return 500, {"type": "InternalError", "code": 500, "failedParameters": {},
                         "details": f"{type(exc).__name__}: {exc}"}

    def _dispatch(self, method, path, headers, body):
        parts = urlsplit(path)
        query = {k: v[-1] for k, v in parse_qs(parts.query).items()}
        for m, template, rx, handler in self._routes:
            if m != method:
                continue
            match = rx.match(parts.path)
            if match is None:
                continue
            params = {k: unquote(v) for k, v in match.groupdict().items()}
            if "user" in params:
                token_user = self.registry.user_for_token(_bearer(headers))
                if token_user != params["user"]:
                    raise Unauthorized("token does not belong to this user", user=params["user"])
            elif template == "/auth/all":
                self.registry.user_for_token(_bearer(headers))
            doc = _parse_body(body) if method in ("POST", "PUT") else None
            return handler(params=params, query=query, body=doc)
        raise RouteNotFound(f"no route for {method} {parts.path}", method=method, path=parts.path)

    # ---------------------------------------------------------- auth

    def register(self, body, **_):
        name, password = _require(body, "user_name", "user_password")
        return 201, self.registry.register_user(name, password).to_api()

    def login(self, body, **_):
        name, password = _require(body, "user_name", "user_password")
        token = self.registry.authenticate(name, password)
        user = next(u for u in self.registry.list_users() if u.user_name == name)
        return 200, {"token": token, "userName": name, "userId": user.user_id}

    def all_users(self, **_):
        return 200, [u.to_api() for u in self.registry.list_users()]

    # ----------------------------------------------------------- PEs

    def add_pe(self, params, body, **_):
        descriptor = _descriptor_from_body(body)
        rec = self.registry.add_pe(params["user"], descriptor, body.get("description"))
        return 201, rec.to_api()

    def all_pes(self, params, **_):
        return 200, [r.to_api() for r in self.registry.pes_of(params["user"])]

    def get_pe(self, params, **_):
        return 200, self.registry.get_pe(params["user"], _key(params)).to_api()

    def remove_pe(self, params, **_):
        return 200, self.registry.remove_pe(params["user"], _key(params))

    # ----------------------------------------------------- workflows

    def add_workflow(self, params, body, **_):
        graph = _graph_from_body(body)
        name = body.get("name") or graph.name
        rec = self.registry.add_workflow(params["user"], graph, name, body.get("description"))
        doc = rec.to_api()
        doc["peIds"] = [p.pe_id for p in self.registry.pes_by_workflow(params["user"], rec.workflow_id)]
        return 201, doc

    def all_workflows(self, params, **_):
        return 200, [r.to_api() for r in self.registry.workflows_of(params["user"])]

    def get_workflow(self, params, **_):
        return 200, self.registry.get_workflow(params["user"], _key(params)).to_api()

    def pes_by_workflow(self, params, **_):
        return 200, [r.to_api() for r in self.registry.pes_by_workflow(params["user"], _key(params))]

    def remove_workflow(self, params, **_):
        return 200, self.registry.remove_workflow(params["user"], _key(params))

    def link(self, params, **_):
        wid = _int(params["workflowId"], "workflowId")
        pid = _int(params["peId"], "peId")
        return 200, self.registry.link_pe_workflow(params["user"], wid, pid)

    # -------------------------------------------------------- registry

    def all_records(self, params, **_):
        listing = self.registry.list_all(params["user"])
        return 200, {"pes": [r.to_api() for r in listing["pes"]],
                     "workflows": [r.to_api() for r in listing["workflows"]]}

    def search(self, params, query, **_):
        hits = registry_search(self.registry, params["search"], params["type"], params["user"],
                               query.get("query_type", "text"))
        return 200, [h.to_json() for h in hits]

    # ------------------------------------------------------- execution

    def run(self, params, body, **_):
        user = params["user"]
        ref = body.get("workflow")
        if isinstance(ref, dict):
            graph = WorkflowGraph.from_json(ref)
        elif isinstance(ref, bool) or ref is None:
            raise ValidationError("workflow must be a name, an id or a graph", workflow=ref)
        elif isinstance(ref, int):
            graph = self.registry.get_workflow(user, ref).graph()
        else:
            graph = self.registry.get_workflow(user, str(ref)).graph()
        iterations = body.get("input", 1)
        if isinstance(iterations, bool) or not isinstance(iterations, int) or iterations < 0:
            raise ValidationError("input must be a nonnegative iteration count", input=iterations)
        process = body.get("process") or "SIMPLE"
        args = body.get("args")
        if args is None:
            args = {}
        if not isinstance(args, dict):
            raise ValidationError("args must be an object", args=args)
        num = args.get("num")
        if str(process).upper() != "SIMPLE":
            if isinstance(num, bool) or not isinstance(num, int):
                raise ValidationError("args.num (process count) is required for parallel mappings",
                                      num=num)
        resources = body.get("resources") or None
        result = self.engine.run(graph, iterations, process, num, args, resources)
        return 200, result.to_json()


def _bearer(headers: dict[str, str]) -> str | None:
    for k, v in headers.items():
        if k.lower() == "authorization":
            scheme, _, token = v.partition(" ")
            return token.strip() if scheme.lower() == "bearer" else v.strip()
    return None


def _parse_body(body) -> dict[str, Any]:
    if body is None or body == b"" or body == "":
        return {}
    if isinstance(body, dict):
        return body
    try:
        doc = json.loads(body)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ValidationError(f"request body is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ValidationError("request body must be a JSON object")
    return doc


def _require(body: dict[str, Any], *names: str) -> list[Any]:
    missing = [n for n in names if not body.get(n)]
    if missing:
        raise ValidationError(f"missing fields: {', '.join(missing)}",
                              **{n: None for n in missing})
    return [body[n] for n in names]


def _key(params: dict[str, str]) -> int | str:
    if "id" in params:
        return _int(params["id"], "id")
    return params["name"]


def _descriptor_from_body(body: dict[str, Any]) -> PEDescriptor:
    code = body.get("code")
    if not code:
        raise ValidationError("PE code is required", code=None)
    source = deserialize_payload(code)
    if body.get("descriptor"):
        doc = dict(body["descriptor"])
        doc["source"] = source
        if "imports" in body:
            doc["imports"] = body["imports"]
        elif not doc.get("imports"):
            doc["imports"] = scan_imports(source)
        descriptor = PEDescriptor.from_json(doc)
    else:
        descriptor = parse_pe_source(source).descriptor
    if body.get("name") and body["name"] != descriptor.name:
        raise InvalidDescriptor("name does not match the descriptor", name=body["name"])
    return descriptor


def _graph_from_body(body: dict[str, Any]) -> WorkflowGraph:
    doc = body.get("graph")
    if doc is None and body.get("code"):
        try:
            doc = json.loads(deserialize_payload(body["code"]))
        except json.JSONDecodeError as exc:
            raise DecodeError(f"workflow code is not a graph document: {exc}") from None
    if doc is None:
        raise ValidationError("workflow graph is required", graph=None)
    return WorkflowGraph.from_json(doc)


# ------------------------------------------------------------------ serving

def make_handler(app: App):
    class Handler(BaseHTTPRequestHandler):
        server_version = "laminar"

        def _handle(self):
            length = int(self.headers.get("Content-Length") or 0)
            body = self.rfile.read(length) if length else None
            status, doc = app.dispatch(self.command, self.path, dict(self.headers), body)
            payload = json.dumps(doc).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(payload)))
            self.end_headers()
            self.wfile.write(payload)

        do_GET = do_POST = do_PUT = do_DELETE = _handle

        def log_message(self, fmt, *args):
            log.info("%s - %s", self.address_string(), fmt % args)

    return Handler


def make_server(app: App, host: str = "127.0.0.1", port: int = 0) -> ThreadingHTTPServer:
    server = ThreadingHTTPServer((host, port), make_handler(app))
    server.daemon_threads = True
    return server


def serve_in_thread(app: App, host: str = "127.0.0.1", port: int = 0):
    server = make_server(app, host, port)
    t = threading.Thread(target=server.serve_forever, daemon=True)
    t.start()
    return server, t


def app_from_env() -> App:
    provider_url = os.environ.get("LAMINAR_PROVIDER_URL")
    provider = HttpProvider(provider_url) if provider_url else None
    registry = Registry(provider, os.environ.get("LAMINAR_STORE") or None)
    return App(registry)


def main(argv=None) -> None:
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(levelname)s %(message)s")
    addr = os.environ.get("LAMINAR_ADDR", "127.0.0.1:8000")
    host, _, port = addr.rpartition(":")
    server = make_server(app_from_env(), host or "127.0.0.1", int(port))
    log.info("laminar server listening on %s:%d", *server.server_address[:2])
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()


if __name__ == "__main__":
    main()
