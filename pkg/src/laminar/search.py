"""Registry search: substring text search, semantic and code-completion ranking.

Semantic search compares a query embedding with the description embeddings
stored at registration time; code-completion search does the same against
code embeddings. Stored vectors are never recomputed here.

Embeddings come from an :class:`EmbeddingProvider`. :class:`FallbackProvider`
is a deterministic hashed bag-of-tokens model used when no neural model
service is configured; :class:`HttpProvider` talks to such a service.
"""

from __future__ import annotations

import json
import math
import re
import urllib.error
import urllib.request
from dataclasses import dataclass
from typing import Any, Iterable, Protocol

import numpy as np

from .errors import DimMismatch, InvalidScope, ProviderUnavailable
from .routing import stable_hash

DEFAULT_DIM = 256

# scores equal to this many decimals count as ties and fall back to id order
SCORE_DECIMALS = 12

SCOPES = ("pe", "workflow", "both")

_WS = re.compile(r"\s+")
_TOKEN = re.compile(r"[^\W_]+")


def normalize_text(s: str | None) -> str:
    if not s:
        return ""
    return _WS.sub(" ", s.strip().lower())


def tokenize(text: str) -> list[str]:
    return [t.lower() for t in _TOKEN.findall(text or "")]


def fallback_embed(text: str, dim: int = DEFAULT_DIM) -> np.ndarray:
    """Hash each token into one of ``dim`` buckets, count, L2-normalise.

    Text with no tokens maps to the zero vector.
    """
    v = np.zeros(dim, dtype=np.float64)
    for tok in tokenize(text):
        v[stable_hash(tok.encode("utf-8")) % dim] += 1.0
    norm = np.linalg.norm(v)
    if norm > 0:
        v /= norm
    return v


def cosine(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimMismatch(f"embedding dims differ: {a.shape} vs {b.shape}",
                          dims=[a.size, b.size])
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


# -------------------------------------------------------------- summaries

def first_comment_line(source: str) -> str | None:
    """First ``#`` comment or docstring line, skipping ``#@`` header lines."""
    lines = source.splitlines()
    for i, line in enumerate(lines):
        stripped = line.strip()
        if stripped.startswith(("#@", "#!")):
            continue
        if stripped.startswith("#"):
            text = stripped.lstrip("#").strip()
            if text:
                return text
        for quote in ('"""', "'''"):
            if stripped.startswith(quote):
                body = [stripped[3:]] + [l.strip() for l in lines[i + 1:]]
                for raw in body:
                    text = raw.split(quote)[0].strip()
                    if text:
                        return text
                    if quote in raw:
                        break
    return None


def template_summary(descriptor) -> str:
    ins = ", ".join(p.name for p in descriptor.inputs)
    outs = ", ".join(descriptor.outputs)
    return f"PE {descriptor.name} ({descriptor.kind.value}) with inputs [{ins}] and outputs [{outs}]"


def fallback_summary(source: str, descriptor=None) -> str:
    line = first_comment_line(source or "")
    if line:
        return line
    if descriptor is None:
        from .peformat import parse_pe_source
        descriptor = parse_pe_source(source).descriptor
    return template_summary(descriptor)


# ------------------------------------------------------------- providers

class EmbeddingProvider(Protocol):
    tag: str

    def desc_embed(self, text: str) -> np.ndarray: ...

    def code_embed(self, source: str) -> np.ndarray: ...

    def summarize(self, source: str, descriptor=None) -> str: ...


class FallbackProvider:
    def __init__(self, dim: int = DEFAULT_DIM):
        self.dim = dim
        self.tag = f"fallback-hash-{dim}"

    def desc_embed(self, text: str) -> np.ndarray:
        return fallback_embed(text, self.dim)

    def code_embed(self, source: str) -> np.ndarray:
        return fallback_embed(source, self.dim)

    def summarize(self, source: str, descriptor=None) -> str:
        return fallback_summary(source, descriptor)


class HttpProvider:
    """Client for an external model service.

    ``POST /embed {"kind", "text"} -> {"dim", "values"}`` and
    ``POST /summarize {"text"} -> {"summary"}``. Any transport failure,
    timeout or non-2xx reply raises :class:`ProviderUnavailable`; there is
    deliberately no silent fallback.
    """

    def __init__(self, base_url: str, timeout: float = 10.0):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self.tag = f"http:{self.base_url}"

    def _post(self, path: str, doc: dict[str, Any]) -> dict[str, Any]:
        req = urllib.request.Request(
            self.base_url + path, data=json.dumps(doc).encode("utf-8"),
            headers={"Content-Type": "application/json"}, method="POST")
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                return json.loads(resp.read().decode("utf-8"))
        except urllib.error.HTTPError as exc:
            raise ProviderUnavailable(f"provider answered {exc.code} on {path}",
                                      provider=self.base_url) from None
        except (urllib.error.URLError, OSError, ValueError) as exc:
            raise ProviderUnavailable(f"provider unreachable: {exc}",
                                      provider=self.base_url) from None

    def _embed(self, kind: str, text: str) -> np.ndarray:
        doc = self._post("/embed", {"kind": kind, "text": text})
        try:
            values = np.asarray(doc["values"], dtype=np.float64)
            if values.shape != (int(doc["dim"]),):
                raise ValueError("dim does not match values")
        except (KeyError, TypeError, ValueError) as exc:
            raise ProviderUnavailable(f"malformed embedding reply: {exc}",
                                      provider=self.base_url) from None
        return normalize(values)

    def desc_embed(self, text: str) -> np.ndarray:
        return self._embed("desc", text)

    def code_embed(self, source: str) -> np.ndarray:
        return self._embed("code", source)

    def summarize(self, source: str, descriptor=None) -> str:
        doc = self._post("/summarize", {"text": source})
        summary = doc.get("summary") if isinstance(doc, dict) else None
        if not isinstance(summary, str):
            raise ProviderUnavailable("malformed summary reply", provider=self.base_url)
        return summary


def normalize(v: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(v)
    return v / n if n > 0 else np.zeros_like(v)


# ---------------------------------------------------------------- search

@dataclass(frozen=True)
class SearchHit:
    kind: str
    id: int
    name: str
    description: str
    score: float | None = None

    def to_json(self) -> dict[str, Any]:
        return {"kind": self.kind, "id": self.id, "name": self.name,
                "description": self.description, "score": self.score}


def rank_key(hit: SearchHit):
    return (-round(hit.score, SCORE_DECIMALS), hit.id)


def text_search(store, query: str, scope: str, caller: str) -> list[SearchHit]:
    """Case- and whitespace-insensitive substring match over names and descriptions.

    PE hits come before workflow hits; each group is ordered by id.
    """
    if scope not in SCOPES:
        raise InvalidScope(f"search type must be one of {', '.join(SCOPES)}", type=scope)
    q = normalize_text(query)
    hits = []
    if scope in ("pe", "both"):
        for rec in store.pes_of(caller):
            if q in normalize_text(rec.pe_name) or q in normalize_text(rec.description):
                hits.append(SearchHit("pe", rec.pe_id, rec.pe_name, rec.description))
    if scope in ("workflow", "both"):
        for rec in store.workflows_of(caller):
            if (q in normalize_text(rec.entry_point) or q in normalize_text(rec.workflow_name)
                    or q in normalize_text(rec.description)):
                hits.append(SearchHit("workflow", rec.workflow_id, rec.entry_point,
                                      rec.description or ""))
    return hits


def _rank(records: Iterable, query_vec: np.ndarray, field: str) -> list[SearchHit]:
    hits = [SearchHit("pe", r.pe_id, r.pe_name, r.description,
                      cosine(query_vec, getattr(r, field)))
            for r in records]
    hits.sort(key=rank_key)
    return hits


def semantic_search(store, query: str, caller: str, provider=None) -> list[SearchHit]:
    provider = provider or store.provider
    q = provider.desc_embed(query)
    return _rank(store.pes_of(caller), q, "desc_embedding")


def code_completion_search(store, snippet: str, caller: str, provider=None) -> list[SearchHit]:
    provider = provider or store.provider
    q = provider.code_embed(snippet)
    return _rank(store.pes_of(caller), q, "code_embedding")


def registry_search(store, query: str, scope: str, caller: str,
                    query_type: str = "text") -> list[SearchHit]:
    """Dispatch used by the search endpoint.

    ``code`` queries rank PEs by code similarity. ``text`` queries scoped to
    ``pe`` run the semantic search; other text scopes run substring search.
    """
    if scope not in SCOPES:
        raise InvalidScope(f"search type must be one of {', '.join(SCOPES)}", type=scope)
    if query_type == "code":
        if scope == "workflow":
            raise InvalidScope("code queries only search PEs", type=scope, query_type=query_type)
        return code_completion_search(store, query, caller)
    if query_type != "text":
        raise InvalidScope("query_type must be text or code", query_type=query_type)
    if scope == "pe":
        return semantic_search(store, query, caller)
    return text_search(store, query, scope, caller)


def is_unit_or_zero(v, tol: float = 1e-6) -> bool:
    n = float(np.linalg.norm(v))
    return n == 0.0 or math.isclose(n, 1.0, abs_tol=tol)
