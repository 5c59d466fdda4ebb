"""Registry of users, PEs and workflows with ownership and composition links.

Users see only records they are linked to. Registering a PE that already
exists (same name, same source digest) links the caller to the existing
record instead of duplicating it; a record is deleted when its last owner
removes it.

The whole store is one JSON document written atomically (temp file and
rename). Access is serialised by a single re-entrant lock.
"""

from __future__ import annotations

import base64
import hashlib
import hmac
import json
import os
import secrets
import tempfile
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .dataflow import PEDescriptor, WorkflowGraph
from .errors import DecodeError, DuplicateUser, InvalidCredentials, InvalidGraph, NotFound, Unauthorized
from .routing import stable_hash
from .search import FallbackProvider, normalize_text

PBKDF2_ITERATIONS = 100_000
TOKEN_TTL = 24 * 3600.0


def content_digest(source: str) -> str:
    return f"{stable_hash(source.encode('utf-8')):016x}"


def b64encode_text(text: str) -> str:
    return base64.b64encode(text.encode("utf-8")).decode("ascii")


def b64decode_text(data: str) -> str:
    try:
        return base64.b64decode(data, validate=True).decode("utf-8")
    except (ValueError, TypeError) as exc:
        raise DecodeError(f"not valid base64 text: {exc}") from None


def hash_password(password: str, iterations: int = PBKDF2_ITERATIONS, salt: bytes | None = None) -> str:
    salt = salt or secrets.token_bytes(16)
    dk = hashlib.pbkdf2_hmac("sha256", password.encode("utf-8"), salt, iterations)
    return f"pbkdf2_sha256${iterations}${salt.hex()}${dk.hex()}"


def verify_password(password: str, digest: str) -> bool:
    try:
        _, iterations, salt, expected = digest.split("$")
    except ValueError:
        return False
    dk = hashlib.pbkdf2_hmac("sha256", password.encode("utf-8"), bytes.fromhex(salt), int(iterations))
    return hmac.compare_digest(dk.hex(), expected)


@dataclass
class UserRecord:
    user_id: int
    user_name: str
    password_digest: str = field(repr=False)

    def to_api(self) -> dict[str, Any]:
        return {"userId": self.user_id, "userName": self.user_name}


@dataclass
class PERecord:
    pe_id: int
    pe_name: str
    pe_code: str
    pe_imports: list[str]
    description: str
    desc_embedding: np.ndarray
    code_embedding: np.ndarray
    descriptor: PEDescriptor
    digest: str

    @property
    def source(self) -> str:
        return b64decode_text(self.pe_code)

    def to_api(self) -> dict[str, Any]:
        desc = self.descriptor.to_json()
        desc.pop("source", None)
        return {
            "peId": self.pe_id,
            "peName": self.pe_name,
            "peCode": self.pe_code,
            "peImports": list(self.pe_imports),
            "description": self.description,
            "descriptor": desc,
        }

    def __eq__(self, other):
        if not isinstance(other, PERecord):
            return NotImplemented
        return (self.to_api() == other.to_api() and self.digest == other.digest
                and _bits_equal(self.desc_embedding, other.desc_embedding)
                and _bits_equal(self.code_embedding, other.code_embedding))


def _bits_equal(a: np.ndarray, b: np.ndarray) -> bool:
    return a.shape == b.shape and a.tobytes() == b.tobytes()


@dataclass
class WorkflowRecord:
    workflow_id: int
    workflow_name: str
    entry_point: str
    description: str | None
    workflow_code: str

    def graph(self) -> WorkflowGraph:
        try:
            doc = json.loads(b64decode_text(self.workflow_code))
        except json.JSONDecodeError as exc:
            raise DecodeError(f"stored workflow is not a graph document: {exc}") from None
        return WorkflowGraph.from_json(doc)

    def to_api(self) -> dict[str, Any]:
        return {
            "workflowId": self.workflow_id,
            "workflowName": self.workflow_name,
            "entryPoint": self.entry_point,
            "description": self.description,
            "workflowCode": self.workflow_code,
        }


class Registry:
    def __init__(self, provider=None, path: str | Path | None = None, *,
                 pbkdf2_iterations: int = PBKDF2_ITERATIONS, token_ttl: float = TOKEN_TTL):
        self.provider = provider or FallbackProvider()
        self.path = Path(path) if path else None
        self.pbkdf2_iterations = pbkdf2_iterations
        self.token_ttl = token_ttl
        self._lock = threading.RLock()
        self.users: dict[int, UserRecord] = {}
        self.pes: dict[int, PERecord] = {}
        self.workflows: dict[int, WorkflowRecord] = {}
        self.user_pes: list[tuple[int, int]] = []
        self.user_workflows: list[tuple[int, int]] = []
        self.workflow_pes: list[tuple[int, int]] = []
        self._next = {"user": 1, "pe": 1, "workflow": 1}
        self._tokens: dict[str, tuple[str, float]] = {}
        if self.path is not None and self.path.exists():
            self._load_document(json.loads(self.path.read_text(encoding="utf-8")))

    # ----------------------------------------------------------- users

    def _new_id(self, kind: str) -> int:
        i = self._next[kind]
        self._next[kind] = i + 1
        return i

    def _user(self, name: str) -> UserRecord:
        for u in self.users.values():
            if u.user_name == name:
                return u
        raise Unauthorized(f"unknown user {name!r}", user=name)

    def register_user(self, user_name: str, password: str) -> UserRecord:
        if not user_name or not password:
            raise InvalidCredentials("user name and password are required", user_name=user_name)
        with self._lock:
            if any(u.user_name == user_name for u in self.users.values()):
                raise DuplicateUser(f"user {user_name!r} already exists", user_name=user_name)
            rec = UserRecord(self._new_id("user"), user_name,
                             hash_password(password, self.pbkdf2_iterations))
            self.users[rec.user_id] = rec
            self._commit()
            return rec

    def authenticate(self, user_name: str, password: str) -> str:
        with self._lock:
            user = next((u for u in self.users.values() if u.user_name == user_name), None)
            if user is None or not verify_password(password, user.password_digest):
                raise InvalidCredentials("invalid login credentials", user_name=user_name)
            token = secrets.token_urlsafe(32)
            self._tokens[token] = (user_name, time.monotonic() + self.token_ttl)
            return token

    def user_for_token(self, token: str | None) -> str:
        with self._lock:
            entry = self._tokens.get(token or "")
            if entry is None:
                raise Unauthorized("missing or unknown token")
            name, expires = entry
            if time.monotonic() > expires:
                del self._tokens[token]
                raise Unauthorized("token expired")
            return name

    def list_users(self) -> list[UserRecord]:
        with self._lock:
            return list(self.users.values())

    # ------------------------------------------------------------- PEs

    def pes_of(self, user: str) -> list[PERecord]:
        with self._lock:
            uid = self._user(user).user_id
            return [self.pes[p] for u, p in self.user_pes if u == uid]

    def workflows_of(self, user: str) -> list[WorkflowRecord]:
        with self._lock:
            uid = self._user(user).user_id
            return [self.workflows[w] for u, w in self.user_workflows if u == uid]

    def add_pe(self, user: str, descriptor: PEDescriptor, description: str | None = None) -> PERecord:
        source = descriptor.source
        digest = content_digest(source)
        with self._lock:
            uid = self._user(user).user_id
            for rec in self.pes.values():
                if rec.pe_name == descriptor.name and rec.digest == digest:
                    if (uid, rec.pe_id) not in self.user_pes:
                        self.user_pes.append((uid, rec.pe_id))
                        self._commit()
                    return rec
        # model calls may be slow; run them outside the lock
        if not description or not description.strip():
            description = self.provider.summarize(source, descriptor)
        desc_vec = np.asarray(self.provider.desc_embed(description), dtype=np.float64)
        code_vec = np.asarray(self.provider.code_embed(source), dtype=np.float64)
        with self._lock:
            for rec in self.pes.values():
                if rec.pe_name == descriptor.name and rec.digest == digest:
                    break
            else:
                rec = PERecord(
                    pe_id=self._new_id("pe"),
                    pe_name=descriptor.name,
                    pe_code=b64encode_text(source),
                    pe_imports=list(descriptor.imports),
                    description=description,
                    desc_embedding=desc_vec,
                    code_embedding=code_vec,
                    descriptor=descriptor,
                    digest=digest,
                )
                self.pes[rec.pe_id] = rec
            if (uid, rec.pe_id) not in self.user_pes:
                self.user_pes.append((uid, rec.pe_id))
            self._commit()
            return rec

    def _resolve_pe(self, user: str, key: int | str) -> PERecord:
        for rec in self.pes_of(user):
            if isinstance(key, int) and not isinstance(key, bool):
                if rec.pe_id == key:
                    return rec
            elif normalize_text(rec.pe_name) == normalize_text(key):
                return rec
        raise NotFound(f"PE {key!r} not found", pe=key)

    def get_pe(self, user: str, key: int | str) -> PERecord:
        with self._lock:
            return self._resolve_pe(user, key)

    def remove_pe(self, user: str, key: int | str) -> dict[str, Any]:
        with self._lock:
            rec = self._resolve_pe(user, key)
            uid = self._user(user).user_id
            self.user_pes.remove((uid, rec.pe_id))
            deleted = not any(p == rec.pe_id for _, p in self.user_pes)
            if deleted:
                del self.pes[rec.pe_id]
                self.workflow_pes = [(w, p) for w, p in self.workflow_pes if p != rec.pe_id]
            self._commit()
            return {"peId": rec.pe_id, "peName": rec.pe_name, "recordDeleted": deleted}

    # ------------------------------------------------------- workflows

    def add_workflow(self, user: str, graph: WorkflowGraph, workflow_name: str | None = None,
                     description: str | None = None) -> WorkflowRecord:
        graph.validate()
        name = workflow_name or graph.name
        if not name:
            raise InvalidGraph("workflow needs a name")
        if description is None:
            description = graph.description
        pe_records = [self.add_pe(user, pe) for pe in graph.nodes.values()]
        doc = graph.to_json()
        doc["name"] = name
        doc["description"] = description
        with self._lock:
            uid = self._user(user).user_id
            taken = {normalize_text(w.entry_point) for w in self.workflows.values()}
            entry, k = name, 2
            while normalize_text(entry) in taken:
                entry, k = f"{name}-{k}", k + 1
            rec = WorkflowRecord(self._new_id("workflow"), name, entry, description,
                                 b64encode_text(json.dumps(doc, sort_keys=True)))
            self.workflows[rec.workflow_id] = rec
            self.user_workflows.append((uid, rec.workflow_id))
            for pe in pe_records:
                if pe.pe_id in self.pes and (rec.workflow_id, pe.pe_id) not in self.workflow_pes:
                    self.workflow_pes.append((rec.workflow_id, pe.pe_id))
            self._commit()
            return rec

    def _resolve_workflow(self, user: str, key: int | str) -> WorkflowRecord:
        mine = self.workflows_of(user)
        if isinstance(key, int) and not isinstance(key, bool):
            for rec in mine:
                if rec.workflow_id == key:
                    return rec
        else:
            k = normalize_text(key)
            for attr in ("entry_point", "workflow_name"):
                for rec in mine:
                    if normalize_text(getattr(rec, attr)) == k:
                        return rec
        raise NotFound(f"workflow {key!r} not found", workflow=key)

    def get_workflow(self, user: str, key: int | str) -> WorkflowRecord:
        with self._lock:
            return self._resolve_workflow(user, key)

    def remove_workflow(self, user: str, key: int | str) -> dict[str, Any]:
        with self._lock:
            rec = self._resolve_workflow(user, key)
            uid = self._user(user).user_id
            self.user_workflows.remove((uid, rec.workflow_id))
            deleted = not any(w == rec.workflow_id for _, w in self.user_workflows)
            if deleted:
                del self.workflows[rec.workflow_id]
                self.workflow_pes = [(w, p) for w, p in self.workflow_pes if w != rec.workflow_id]
            self._commit()
            return {"workflowId": rec.workflow_id, "entryPoint": rec.entry_point,
                    "recordDeleted": deleted}

    def pes_by_workflow(self, user: str, key: int | str) -> list[PERecord]:
        with self._lock:
            rec = self._resolve_workflow(user, key)
            return [self.pes[p] for w, p in self.workflow_pes if w == rec.workflow_id]

    def link_pe_workflow(self, user: str, workflow_id: int, pe_id: int) -> dict[str, Any]:
        with self._lock:
            wf = self._resolve_workflow(user, workflow_id)
            pe = self._resolve_pe(user, pe_id)
            pair = (wf.workflow_id, pe.pe_id)
            created = pair not in self.workflow_pes
            if created:
                self.workflow_pes.append(pair)
                self._commit()
            return {"workflowId": wf.workflow_id, "peId": pe.pe_id, "created": created}

    def list_all(self, user: str) -> dict[str, list]:
        with self._lock:
            return {"pes": self.pes_of(user), "workflows": self.workflows_of(user)}

    # ------------------------------------------------------ persistence

    def to_document(self) -> dict[str, Any]:
        with self._lock:
            pes = []
            for r in self.pes.values():
                d = r.to_api()
                d["descEmbedding"] = r.desc_embedding.tolist()
                d["codeEmbedding"] = r.code_embedding.tolist()
                d["digest"] = r.digest
                pes.append(d)
            return {
                "users": [{"userId": u.user_id, "userName": u.user_name,
                           "password": u.password_digest} for u in self.users.values()],
                "pes": pes,
                "workflows": [w.to_api() for w in self.workflows.values()],
                "links": {
                    "userPEs": [list(x) for x in self.user_pes],
                    "userWorkflows": [list(x) for x in self.user_workflows],
                    "workflowPEs": [list(x) for x in self.workflow_pes],
                },
                "nextIds": dict(self._next),
            }

    def _load_document(self, doc: dict[str, Any]) -> None:
        self.users = {u["userId"]: UserRecord(u["userId"], u["userName"], u["password"])
                      for u in doc.get("users", [])}
        self.pes = {}
        for d in doc.get("pes", []):
            source = b64decode_text(d["peCode"])
            desc = dict(d["descriptor"], source=source)
            self.pes[d["peId"]] = PERecord(
                pe_id=d["peId"], pe_name=d["peName"], pe_code=d["peCode"],
                pe_imports=list(d["peImports"]), description=d["description"],
                desc_embedding=np.asarray(d["descEmbedding"], dtype=np.float64),
                code_embedding=np.asarray(d["codeEmbedding"], dtype=np.float64),
                descriptor=PEDescriptor.from_json(desc), digest=d["digest"])
        self.workflows = {
            w["workflowId"]: WorkflowRecord(w["workflowId"], w["workflowName"], w["entryPoint"],
                                            w.get("description"), w["workflowCode"])
            for w in doc.get("workflows", [])}
        links = doc.get("links", {})
        self.user_pes = [tuple(x) for x in links.get("userPEs", [])]
        self.user_workflows = [tuple(x) for x in links.get("userWorkflows", [])]
        self.workflow_pes = [tuple(x) for x in links.get("workflowPEs", [])]
        self._next = {"user": 1, "pe": 1, "workflow": 1}
        self._next.update(doc.get("nextIds", {}))

    def save(self, path: str | Path | None = None) -> Path:
        target = Path(path) if path else self.path
        if target is None:
            raise ValueError("no store path configured")
        doc = self.to_document()
        target.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(prefix=target.name + ".", suffix=".tmp", dir=target.parent)
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                json.dump(doc, fh)
            os.replace(tmp, target)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        return target

    @classmethod
    def load(cls, path: str | Path, provider=None, **kw) -> "Registry":
        return cls(provider, path, **kw)

    def _commit(self) -> None:
        if self.path is not None:
            self.save()
