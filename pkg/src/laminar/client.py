"""Python client for a Laminar server.

Method names (``register_PE``, ``search_Registry`` ...) match the
original dispel4py-era client so existing scripts port directly.
"""

from __future__ import annotations

import json
import urllib.error
import urllib.request
from pathlib import Path
from typing import Any, Union
from urllib.parse import quote, urlencode

from .dataflow import PEDescriptor, WorkflowGraph
from .engine import RunResult, bundle_directory
from .peformat import load_pe_file, parse_pe_source
from .server import serialize_payload


class ClientError(Exception):
    """An ApiError reply, or a transport failure rendered like one."""

    def __init__(self, error: dict[str, Any]):
        self.error = error
        super().__init__(f"{error.get('type')} ({error.get('code')}): {error.get('details')}")

    @property
    def type(self) -> str:
        return self.error.get("type", "")

    @property
    def code(self) -> int:
        return self.error.get("code", 0)


Key = Union[str, int]


def _segment(key: Key) -> tuple[str, str]:
    if isinstance(key, int) and not isinstance(key, bool):
        return "id", str(key)
    return "name", quote(str(key), safe="")


def load_workflow_file(path: str | Path) -> WorkflowGraph:
    """Read a workflow JSON document whose nodes may point at PE source files.

    Nodes are either full descriptor objects or ``{"file": "pes/x.py"}``
    references, resolved relative to the workflow file.
    """
    path = Path(path)
    doc = json.loads(path.read_text(encoding="utf-8"))
    nodes = []
    for node in doc.get("nodes", []):
        if "file" in node:
            nodes.append(load_pe_file(path.parent / node["file"]).descriptor.to_json())
        else:
            nodes.append(node)
    doc["nodes"] = nodes
    doc.setdefault("name", path.stem)
    return WorkflowGraph.from_json(doc)


class LaminarClient:
    def __init__(self, base_url: str = "http://127.0.0.1:8000", user: str | None = None,
                 token: str | None = None, timeout: float = 300.0):
        if "://" not in base_url:
            base_url = "http://" + base_url
        self.base_url = base_url.rstrip("/")
        self.user = user
        self.token = token
        self.timeout = timeout

    # ------------------------------------------------------------ transport

    def request(self, method: str, path: str, body: dict | None = None, query: dict | None = None):
        url = self.base_url + path
        if query:
            url += "?" + urlencode(query)
        data = json.dumps(body).encode("utf-8") if body is not None else None
        headers = {"Content-Type": "application/json"}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        req = urllib.request.Request(url, data=data, headers=headers, method=method)
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                return json.loads(resp.read().decode("utf-8"))
        except urllib.error.HTTPError as exc:
            try:
                error = json.loads(exc.read().decode("utf-8"))
            except ValueError:
                error = {"type": "HTTPError", "code": exc.code, "failedParameters": {},
                         "details": str(exc)}
            raise ClientError(error) from None
        except urllib.error.URLError as exc:
            raise ClientError({"type": "ConnectionError", "code": 0, "failedParameters": {},
                               "details": f"cannot reach {self.base_url}: {exc.reason}"}) from None

    def _user_path(self, suffix: str) -> str:
        if not self.user or not self.token:
            raise ClientError({"type": "Unauthorized", "code": 401, "failedParameters": {},
                               "details": "log in first"})
        return f"/registry/{quote(self.user, safe='')}/{suffix}"

    # ----------------------------------------------------------------- auth

    def register(self, user_name: str, user_password: str) -> dict:
        return self.request("POST", "/auth/register",
                            {"user_name": user_name, "user_password": user_password})

    def login(self, user_name: str, user_password: str) -> dict:
        doc = self.request("POST", "/auth/login",
                           {"user_name": user_name, "user_password": user_password})
        self.user, self.token = user_name, doc["token"]
        return doc

    # ------------------------------------------------------------------ PEs

    def register_PE(self, pe: PEDescriptor | str | Path, description: str | None = None) -> dict:
        if not isinstance(pe, PEDescriptor):
            pe = load_pe_file(pe).descriptor
        desc = pe.to_json()
        source = desc.pop("source")
        body = {"name": pe.name, "code": serialize_payload(source),
                "imports": list(pe.imports), "descriptor": desc}
        if description:
            body["description"] = description
        return self.request("POST", self._user_path("pe/add"), body)

    def register_Workflow(self, workflow: WorkflowGraph | str | Path, workflow_name: str | None = None,
                          description: str | None = None) -> dict:
        if not isinstance(workflow, WorkflowGraph):
            workflow = load_workflow_file(workflow)
        doc = workflow.to_json()
        body = {"name": workflow_name or workflow.name, "graph": doc,
                "code": serialize_payload(json.dumps(doc, sort_keys=True))}
        if description or workflow.description:
            body["description"] = description or workflow.description
        return self.request("POST", self._user_path("workflow/add"), body)

    def remove_PE(self, pe: Key) -> dict:
        kind, seg = _segment(pe)
        return self.request("DELETE", self._user_path(f"pe/remove/{kind}/{seg}"))

    def remove_Workflow(self, workflow: Key) -> dict:
        kind, seg = _segment(workflow)
        return self.request("DELETE", self._user_path(f"workflow/remove/{kind}/{seg}"))

    def get_PE(self, pe: Key, describe: bool = False) -> dict:
        kind, seg = _segment(pe)
        doc = self.request("GET", self._user_path(f"pe/{kind}/{seg}"))
        if describe:
            print(format_description(doc))
        return doc

    def get_Workflow(self, workflow: Key, describe: bool = False) -> dict:
        kind, seg = _segment(workflow)
        doc = self.request("GET", self._user_path(f"workflow/{kind}/{seg}"))
        if describe:
            print(format_description(doc))
        return doc

    def get_PEs_By_Workflow(self, workflow: Key) -> list[dict]:
        kind, seg = _segment(workflow)
        return self.request("GET", self._user_path(f"workflow/pes/{kind}/{seg}"))

    def link_PE(self, workflow_id: int, pe_id: int) -> dict:
        return self.request("PUT", self._user_path(f"workflow/{workflow_id}/pe/{pe_id}"))

    # ------------------------------------------------------------- registry

    def search_Registry(self, search: str, search_type: str = "both",
                        query_type: str = "text") -> list[dict]:
        path = self._user_path(f"search/{quote(search, safe='')}/type/{quote(search_type, safe='')}")
        return self.request("GET", path, query={"query_type": query_type})

    def describe(self, obj: Key, workflow: bool = False) -> dict:
        return self.get_Workflow(obj) if workflow else self.get_PE(obj)

    def get_Registry(self) -> dict:
        return self.request("GET", self._user_path("all"))

    def get_users(self) -> list[dict]:
        return self.request("GET", "/auth/all")

    # ------------------------------------------------------------ execution

    def run(self, workflow: Key | WorkflowGraph, input: int | None = None,
            process: str = "SIMPLE", args: dict | None = None,
            resources: bool | str | Path = False) -> RunResult:
        """Execute a registered (name/id) or inline workflow.

        ``resources=True`` ships ``./resources``; a path ships that directory.
        """
        ref: Any = workflow.to_json() if isinstance(workflow, WorkflowGraph) else workflow
        body: dict[str, Any] = {"workflow": ref, "input": 1 if input is None else input,
                                "process": process or "SIMPLE"}
        if args:
            body["args"] = args
        if resources:
            directory = Path("resources") if resources is True else Path(resources)
            if not directory.is_dir():
                raise ClientError({"type": "ValidationError", "code": 400,
                                   "failedParameters": {"resources": str(directory)},
                                   "details": f"resources directory {directory} not found"})
            body["resources"] = bundle_directory(directory)
        if self.user is None or self.token is None:
            raise ClientError({"type": "Unauthorized", "code": 401, "failedParameters": {},
                               "details": "log in first"})
        doc = self.request("POST", f"/execution/{quote(self.user, safe='')}/run", body)
        return RunResult.from_json(doc)


def format_description(doc: dict) -> str:
    if "peId" in doc:
        d = doc.get("descriptor", {})
        ins = ", ".join(p["name"] if isinstance(p, dict) else p for p in d.get("inputs", []))
        outs = ", ".join(d.get("outputs", []))
        return (f"{doc['peName']} (PE {doc['peId']}, {d.get('kind', '?')})\n"
                f"  description: {doc['description']}\n"
                f"  inputs: [{ins}]  outputs: [{outs}]")
    return (f"{doc['workflowName']} (workflow {doc['workflowId']}, entry point {doc['entryPoint']})\n"
            f"  description: {doc.get('description') or ''}")


def descriptor_from_source(source: str) -> PEDescriptor:
    return parse_pe_source(source).descriptor
