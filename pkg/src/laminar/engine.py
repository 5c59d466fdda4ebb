"""Execution of concrete plans under the SIMPLE and MULTI mappings.

SIMPLE runs every PE in the calling thread and pushes each emission
depth-first through the graph before the next producer iteration.

MULTI starts one OS process per PE instance. Instances talk only through
bounded queues, one inbox per receiving instance. Termination is driven by
end-of-stream markers: a root sends EOS on every outgoing connection to
every downstream instance once its iterations are done, and a non-root
instance stops after it has seen one EOS per upstream
``(connection, sender instance)`` pair, then forwards its own EOS.
"""

from __future__ import annotations

import base64
import binascii
import logging
import multiprocessing as mp
import queue
import shutil
import sys
import tempfile
import time
import traceback
from dataclasses import dataclass, field
from pathlib import Path, PurePosixPath
from typing import Any, Iterable

from .behaviors import Catalog, InstanceContext
from .dataflow import ConcretePlan, Mapping, WorkflowGraph, compile_plan, find_roots, topological_order
from .errors import (
    BehaviorPanic,
    DecodeError,
    LaminarError,
    MissingRequirements,
    PathEscape,
    UnresolvedPE,
    UnsupportedMapping,
    WorkerFailure,
)
from .routing import route

log = logging.getLogger(__name__)

CHANNEL_CAPACITY = 1024

DEFAULT_CAPABILITIES = frozenset(sys.stdlib_module_names) | {"laminar", "numpy"}

COMPLETED = "Completed"
FAILED = "Failed"


@dataclass
class RunResult:
    status: str = COMPLETED
    stdout: list[str] = field(default_factory=list)
    outputs: dict[str, list[Any]] = field(default_factory=dict)
    error: dict[str, Any] | None = None

    @property
    def ok(self) -> bool:
        return self.status == COMPLETED

    def to_json(self) -> dict[str, Any]:
        doc: dict[str, Any] = {
            "status": self.status,
            "stdout": list(self.stdout),
            "outputs": {k: [_plain(v) for v in vs] for k, vs in self.outputs.items()},
        }
        if self.error is not None:
            doc["error"] = self.error
        return doc

    @classmethod
    def from_json(cls, doc: dict[str, Any]) -> "RunResult":
        return cls(doc["status"], list(doc.get("stdout", [])),
                   dict(doc.get("outputs", {})), doc.get("error"))

    @classmethod
    def failed(cls, err: LaminarError, stdout=(), outputs=None) -> "RunResult":
        return cls(FAILED, list(stdout), dict(outputs or {}), err.to_api_error())


def _plain(value: Any) -> Any:
    if isinstance(value, tuple):
        return [_plain(v) for v in value]
    if isinstance(value, list):
        return [_plain(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    return value


def _is_sink(plan: ConcretePlan, node: str) -> bool:
    return not plan.graph.nodes[node].outputs


def _root_share(iterations: int, instance: int, n_instances: int) -> int:
    return len(range(instance, iterations, n_instances))


# ---------------------------------------------------------------- SIMPLE

def run_simple(plan: ConcretePlan, catalog: Catalog, iterations: int,
               args: dict[str, Any] | None = None, workdir: Path | None = None) -> RunResult:
    graph = plan.graph
    order = topological_order(graph)
    roots = find_roots(graph)
    stdout: list[str] = []
    outputs: dict[str, list[Any]] = {n: [] for n in graph.nodes}
    pes = {}

    def emitter(node):
        def emit(port, value):
            conns = graph.outgoing(node, port)
            if not conns:
                outputs[node].append(value)
            for c in conns:
                deliver(c.dst, c.dst_port, value)
        return emit

    def deliver(node, port, value):
        route(plan.routing[conn_index[node, port]], value, 0, 1)
        if _is_sink(plan, node):
            outputs[node].append(value)
        current[0] = node
        pes[node].process({port: value})

    conn_index = {(c.dst, c.dst_port): i for i, c in enumerate(graph.connections)}
    for node in order:
        pe = catalog.create(node)
        pe.bind(InstanceContext(node, 0, 1, dict(args or {}), workdir,
                                emitter(node), stdout.append))
        pes[node] = pe
    current = [None]
    try:
        for node in order:
            current[0] = node
            pes[node].setup()
        for _ in range(iterations):
            for r in roots:
                current[0] = r
                pes[r].process(None)
        for node in order:
            current[0] = node
            pes[node].finish()
    except Exception as exc:
        err = BehaviorPanic(f"{current[0]}: {type(exc).__name__}: {exc}",
                            node=current[0], instance=0)
        return RunResult.failed(err, stdout, outputs)
    return RunResult(COMPLETED, stdout, outputs)


# ----------------------------------------------------------------- MULTI

_DATA, _EOS = 0, 1


def _worker(plan: ConcretePlan, catalog: Catalog, node: str, instance: int,
            iterations: int, args: dict, workdir: Path | None,
            inboxes: dict[str, list], results) -> None:
    graph = plan.graph
    conns = graph.connections
    out_idx = [i for i, c in enumerate(conns) if c.src == node]
    counters = {i: 0 for i in out_idx}
    stdout: list[str] = []
    outputs: list[Any] = []

    def emit(port, value):
        targets = [i for i in out_idx if conns[i].src_port == port]
        if not targets:
            outputs.append(value)
        for i in targets:
            dst = conns[i].dst
            k = route(plan.routing[i], value, counters[i], plan.instances[dst])
            counters[i] += 1
            inboxes[dst][k].put((_DATA, i, instance, value))

    try:
        pe = catalog.create(node)
        pe.bind(InstanceContext(node, instance, plan.instances[node], args, workdir,
                                emit, stdout.append))
        pe.setup()
        expected = plan.senders(node)
        if expected == 0:
            for _ in range(_root_share(iterations, instance, plan.instances[node])):
                pe.process(None)
        else:
            inbox = inboxes[node][instance]
            sink = _is_sink(plan, node)
            while expected:
                tag, ci, _sender, payload = inbox.get()
                if tag == _EOS:
                    expected -= 1
                    continue
                if sink:
                    outputs.append(payload)
                pe.process({conns[ci].dst_port: payload})
        pe.finish()
        for i in out_idx:
            for q in inboxes[conns[i].dst]:
                q.put((_EOS, i, instance, None))
    except BaseException as exc:
        detail = f"{node}[{instance}]: {type(exc).__name__}: {exc}"
        results.put(("error", node, instance, detail, traceback.format_exc(), stdout, outputs))
        return
    results.put(("done", node, instance, stdout, outputs))


def run_parallel(plan: ConcretePlan, catalog: Catalog, iterations: int,
                 args: dict[str, Any] | None = None, workdir: Path | None = None,
                 *, capacity: int = CHANNEL_CAPACITY, start_method: str | None = None,
                 timeout: float | None = None) -> RunResult:
    """Run with one process per instance; see the module docstring for the protocol."""
    if start_method is None:
        start_method = "fork" if "fork" in mp.get_all_start_methods() else "spawn"
    ctx = mp.get_context(start_method)
    graph = plan.graph
    inboxes = {n: [ctx.Queue(maxsize=capacity) for _ in range(plan.instances[n])]
               for n in graph.nodes if graph.incoming(n)}
    results = ctx.Queue()
    args = dict(args or {})

    procs = {}
    for node in graph.nodes:
        for i in range(plan.instances[node]):
            p = ctx.Process(target=_worker, name=f"laminar-{node}-{i}", daemon=True,
                            args=(plan, catalog, node, i, iterations, args, workdir, inboxes, results))
            procs[(node, i)] = p
    for p in procs.values():
        p.start()

    stdout: list[str] = []
    outputs: dict[str, list[Any]] = {n: [] for n in graph.nodes}
    pending = set(procs)
    failure: LaminarError | None = None
    deadline = None if timeout is None else time.monotonic() + timeout
    try:
        while pending and failure is None:
            try:
                msg = results.get(timeout=0.05)
            except queue.Empty:
                for key in pending:
                    code = procs[key].exitcode
                    if code is not None and code != 0:
                        failure = WorkerFailure(
                            f"worker {key[0]}[{key[1]}] exited with code {code}",
                            node=key[0], instance=key[1])
                        break
                if failure is None and deadline is not None and time.monotonic() > deadline:
                    failure = WorkerFailure(f"run exceeded {timeout}s", timeout=timeout)
                continue
            kind, node, instance = msg[:3]
            pending.discard((node, instance))
            if kind == "done":
                stdout.extend(msg[3])
                outputs[node].extend(msg[4])
            else:
                log.debug("worker traceback:\n%s", msg[4])
                stdout.extend(msg[5])
                outputs[node].extend(msg[6])
                failure = BehaviorPanic(msg[3], node=node, instance=instance)
    finally:
        if failure is not None or pending:
            for p in procs.values():
                if p.is_alive():
                    p.terminate()
        for p in procs.values():
            p.join(timeout=5)
        for qs in inboxes.values():
            for q in qs:
                q.cancel_join_thread()
                q.close()
        results.close()
    if failure is not None:
        return RunResult.failed(failure, stdout, outputs)
    return RunResult(COMPLETED, stdout, outputs)


# ----------------------------------------------------------- resources

def materialize_resources(bundle: Iterable, workdir: Path | str) -> list[Path]:
    """Decode a resource bundle into ``workdir/resources``.

    ``bundle`` holds ``{"path": ..., "content": <base64>}`` entries (or
    ``(path, content)`` pairs). Absolute paths and ``..`` segments are refused.
    """
    root = Path(workdir) / "resources"
    written = []
    for entry in bundle:
        rel, content = (entry["path"], entry["content"]) if isinstance(entry, dict) else entry
        parts = PurePosixPath(rel.replace("\\", "/"))
        if not rel or parts.is_absolute() or ".." in parts.parts or rel.startswith("/"):
            raise PathEscape(f"resource path {rel!r} escapes the resources directory", path=rel)
        try:
            data = base64.b64decode(content, validate=True)
        except (binascii.Error, ValueError, TypeError) as exc:
            raise DecodeError(f"resource {rel!r} is not valid base64: {exc}", path=rel) from None
        target = root.joinpath(*parts.parts)
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_bytes(data)
        written.append(target)
    return written


def bundle_directory(directory: Path | str) -> list[dict[str, str]]:
    """Inverse of :func:`materialize_resources` for a local ``resources`` tree."""
    directory = Path(directory)
    entries = []
    for path in sorted(p for p in directory.rglob("*") if p.is_file()):
        entries.append({
            "path": path.relative_to(directory).as_posix(),
            "content": base64.b64encode(path.read_bytes()).decode("ascii"),
        })
    return entries


def check_requirements(imports: Iterable[str], capabilities=None) -> list[str]:
    have = DEFAULT_CAPABILITIES if capabilities is None else set(capabilities)
    missing = []
    for name in imports:
        root = name.split(".")[0]
        if root not in have and root not in missing:
            missing.append(root)
    return missing


# --------------------------------------------------------------- facade

def execute(plan: ConcretePlan, catalog: Catalog, iterations: int,
            resources: Iterable | None = None, args: dict[str, Any] | None = None,
            **parallel_options) -> RunResult:
    if iterations < 0:
        raise ValueError("iterations must be >= 0")
    missing = catalog.missing(plan.graph.nodes)
    if missing:
        raise UnresolvedPE(f"no behaviour registered for {', '.join(missing)}", pe=missing)
    tmp = None
    workdir = None
    try:
        if resources:
            tmp = tempfile.mkdtemp(prefix="laminar-run-")
            workdir = Path(tmp)
            materialize_resources(resources, workdir)
        if plan.mapping is Mapping.SIMPLE:
            return run_simple(plan, catalog, iterations, args, workdir)
        if plan.mapping is Mapping.MULTI:
            return run_parallel(plan, catalog, iterations, args, workdir, **parallel_options)
        raise UnsupportedMapping(f"mapping {plan.mapping.value} cannot be executed",
                                 process=plan.mapping.value)
    finally:
        if tmp is not None:
            shutil.rmtree(tmp, ignore_errors=True)


class Engine:
    """Request-level entry point: requirement check, compile, execute.

    Stateless apart from the catalog and capability set, so one engine can
    serve concurrent requests.
    """

    def __init__(self, catalog: Catalog, capabilities=None, **parallel_options):
        self.catalog = catalog
        self.capabilities = DEFAULT_CAPABILITIES if capabilities is None else frozenset(capabilities)
        self.parallel_options = parallel_options

    def run(self, graph: WorkflowGraph, iterations: int, process="SIMPLE",
            num: int | None = None, args: dict[str, Any] | None = None,
            resources: Iterable | None = None) -> RunResult:
        imports = sorted({i for pe in graph.nodes.values() for i in pe.imports})
        missing = check_requirements(imports, self.capabilities)
        if missing:
            raise MissingRequirements(
                f"execution engine lacks modules: {', '.join(missing)}", imports=missing)
        plan = compile_plan(graph, process, num)
        return execute(plan, self.catalog, iterations, resources, args, **self.parallel_options)
