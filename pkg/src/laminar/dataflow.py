"""Processing Element descriptors, abstract workflow graphs and plan compilation.

A :class:`WorkflowGraph` is the user's abstract DAG. :func:`compile_plan`
turns it into a :class:`ConcretePlan` that fixes how many instances each
node gets and how every connection routes its data.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any, Iterable

from .errors import (
    CycleDetected,
    InvalidDescriptor,
    InvalidGraph,
    NoRoot,
    TooFewProcesses,
    UnknownNode,
    UnknownPort,
    UnsupportedMapping,
    WrongDirection,
)


class PEKind(str, enum.Enum):
    PRODUCER = "Producer"
    ITERATIVE = "Iterative"
    CONSUMER = "Consumer"
    GENERIC = "Generic"


class Mapping(str, enum.Enum):
    SIMPLE = "SIMPLE"
    MULTI = "MULTI"
    REDIS = "REDIS"

    @classmethod
    def parse(cls, name: "str | Mapping") -> "Mapping":
        if isinstance(name, Mapping):
            return name
        key = str(name).strip().upper()
        if key == "MPI":
            raise UnsupportedMapping("the MPI mapping is not supported", process=name)
        try:
            return cls(key)
        except ValueError:
            raise UnsupportedMapping(f"unknown mapping {name!r}", process=name) from None


@dataclass(frozen=True)
class Grouping:
    """Input routing rule. ``indices is None`` means shuffle (round robin)."""

    indices: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.indices is not None:
            if not self.indices:
                raise InvalidDescriptor("group-by needs at least one index")
            if any((not isinstance(i, int)) or i < 0 for i in self.indices):
                raise InvalidDescriptor("group-by indices must be nonnegative integers",
                                        indices=list(self.indices))

    @classmethod
    def group_by(cls, *indices: int) -> "Grouping":
        return cls(tuple(indices))

    @property
    def is_shuffle(self) -> bool:
        return self.indices is None

    def to_json(self) -> Any:
        return "shuffle" if self.indices is None else list(self.indices)

    @classmethod
    def from_json(cls, doc: Any) -> "Grouping":
        if doc is None or doc == "shuffle":
            return SHUFFLE
        if isinstance(doc, int) and not isinstance(doc, bool):
            return cls((doc,))
        if isinstance(doc, list):
            return cls(tuple(doc))
        raise InvalidDescriptor(f"bad grouping {doc!r}", grouping=doc)

    def __str__(self):
        return "shuffle" if self.indices is None else "group-by " + ",".join(map(str, self.indices))


SHUFFLE = Grouping()


@dataclass(frozen=True)
class InputPort:
    name: str
    grouping: Grouping = SHUFFLE


_ARITY = {
    # kind: (required input names, required output names); None = unconstrained
    PEKind.PRODUCER: ((), ("output",)),
    PEKind.ITERATIVE: (("input",), ("output",)),
    PEKind.CONSUMER: (("input",), ()),
    PEKind.GENERIC: (None, None),
}


@dataclass(frozen=True)
class PEDescriptor:
    """Static description of a PE: its name, kind, ports and source payload.

    The source text is carried for storage and search only. Runtime
    behaviour is looked up by ``name`` in a behaviour catalog.
    """

    name: str
    kind: PEKind = PEKind.GENERIC
    inputs: tuple[InputPort, ...] = ()
    outputs: tuple[str, ...] = ()
    stateful: bool = False
    source: str = ""
    imports: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "kind", PEKind(self.kind))
        object.__setattr__(self, "inputs", tuple(
            p if isinstance(p, InputPort) else InputPort(p) for p in self.inputs))
        object.__setattr__(self, "outputs", tuple(self.outputs))
        object.__setattr__(self, "imports", tuple(self.imports))
        if not self.name or not self.name.strip():
            raise InvalidDescriptor("PE name must be nonempty")
        in_names = [p.name for p in self.inputs]
        for names, label in ((in_names, "input"), (list(self.outputs), "output")):
            if any(not n for n in names):
                raise InvalidDescriptor(f"{label} port names must be nonempty", pe=self.name)
            if len(set(names)) != len(names):
                raise InvalidDescriptor(f"duplicate {label} port on {self.name}", pe=self.name)
        want_in, want_out = _ARITY[self.kind]
        if want_in is not None and tuple(in_names) != want_in:
            raise InvalidDescriptor(
                f"{self.kind.value} PE {self.name} must have inputs {list(want_in)}, got {in_names}",
                pe=self.name)
        if want_out is not None and self.outputs != want_out:
            raise InvalidDescriptor(
                f"{self.kind.value} PE {self.name} must have outputs {list(want_out)}, "
                f"got {list(self.outputs)}", pe=self.name)

    @classmethod
    def producer(cls, name: str, **kw) -> "PEDescriptor":
        return cls(name, PEKind.PRODUCER, (), ("output",), **kw)

    @classmethod
    def iterative(cls, name: str, grouping: Grouping = SHUFFLE, **kw) -> "PEDescriptor":
        return cls(name, PEKind.ITERATIVE, (InputPort("input", grouping),), ("output",), **kw)

    @classmethod
    def consumer(cls, name: str, grouping: Grouping = SHUFFLE, **kw) -> "PEDescriptor":
        return cls(name, PEKind.CONSUMER, (InputPort("input", grouping),), (), **kw)

    def input_port(self, name: str) -> InputPort | None:
        for p in self.inputs:
            if p.name == name:
                return p
        return None

    def to_json(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "kind": self.kind.value,
            "inputs": [{"name": p.name, "grouping": p.grouping.to_json()} for p in self.inputs],
            "outputs": list(self.outputs),
            "stateful": self.stateful,
            "source": self.source,
            "imports": list(self.imports),
        }

    @classmethod
    def from_json(cls, doc: dict[str, Any]) -> "PEDescriptor":
        if not isinstance(doc, dict) or "name" not in doc:
            raise InvalidDescriptor("descriptor must be an object with a name")
        try:
            kind = PEKind(doc.get("kind", "Generic"))
        except ValueError:
            raise InvalidDescriptor(f"unknown PE kind {doc.get('kind')!r}", kind=doc.get("kind")) from None
        inputs = []
        for p in doc.get("inputs", []):
            if isinstance(p, str):
                inputs.append(InputPort(p))
            else:
                inputs.append(InputPort(p["name"], Grouping.from_json(p.get("grouping"))))
        return cls(
            name=doc["name"],
            kind=kind,
            inputs=tuple(inputs),
            outputs=tuple(doc.get("outputs", [])),
            stateful=bool(doc.get("stateful", False)),
            source=doc.get("source", ""),
            imports=tuple(doc.get("imports", [])),
        )


@dataclass(frozen=True)
class Connection:
    src: str
    src_port: str
    dst: str
    dst_port: str


@dataclass
class WorkflowGraph:
    """Abstract workflow: named PE nodes joined by port-to-port connections.

    Node ids are PE names, so a PE name may appear only once per graph.
    Insertion order of nodes is kept and used for every tie-break.
    """

    name: str = "workflow"
    description: str | None = None
    nodes: dict[str, PEDescriptor] = field(default_factory=dict)
    connections: list[Connection] = field(default_factory=list)

    def add(self, pe: PEDescriptor) -> str:
        existing = self.nodes.get(pe.name)
        if existing is not None and existing != pe:
            raise InvalidGraph(f"a different PE named {pe.name} is already in the graph", pe=pe.name)
        self.nodes[pe.name] = pe
        return pe.name

    def connect(self, src, src_port: str, dst, dst_port: str) -> "WorkflowGraph":
        """Append a connection. PE descriptors are added on the fly."""
        src_id = self.add(src) if isinstance(src, PEDescriptor) else src
        dst_id = self.add(dst) if isinstance(dst, PEDescriptor) else dst
        for node in (src_id, dst_id):
            if node not in self.nodes:
                raise UnknownNode(f"no node {node!r} in graph", node=node)
        s, d = self.nodes[src_id], self.nodes[dst_id]
        _check_port(s, src_port, out=True)
        _check_port(d, dst_port, out=False)
        if src_id == dst_id or self._reaches(dst_id, src_id):
            raise CycleDetected(f"connecting {src_id} -> {dst_id} would create a cycle",
                                src=src_id, dst=dst_id)
        self.connections.append(Connection(src_id, src_port, dst_id, dst_port))
        return self

    def _reaches(self, start: str, target: str) -> bool:
        seen, stack = set(), [start]
        while stack:
            n = stack.pop()
            if n == target:
                return True
            if n in seen:
                continue
            seen.add(n)
            stack.extend(c.dst for c in self.connections if c.src == n)
        return False

    def incoming(self, node: str) -> list[Connection]:
        return [c for c in self.connections if c.dst == node]

    def outgoing(self, node: str, port: str | None = None) -> list[Connection]:
        return [c for c in self.connections
                if c.src == node and (port is None or c.src_port == port)]

    def validate(self) -> None:
        if not self.nodes:
            raise InvalidGraph("graph has no nodes")
        for c in self.connections:
            for node in (c.src, c.dst):
                if node not in self.nodes:
                    raise UnknownNode(f"no node {node!r} in graph", node=node)
            _check_port(self.nodes[c.src], c.src_port, out=True)
            _check_port(self.nodes[c.dst], c.dst_port, out=False)
        topological_order(self)
        find_roots(self)

    def to_json(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "description": self.description,
            "nodes": [pe.to_json() for pe in self.nodes.values()],
            "connections": [
                {"src": c.src, "src_port": c.src_port, "dst": c.dst, "dst_port": c.dst_port}
                for c in self.connections
            ],
        }

    @classmethod
    def from_json(cls, doc: dict[str, Any]) -> "WorkflowGraph":
        if not isinstance(doc, dict):
            raise InvalidGraph("graph document must be an object")
        g = cls(name=doc.get("name") or "workflow", description=doc.get("description"))
        nodes = doc.get("nodes", [])
        if isinstance(nodes, dict):
            nodes = list(nodes.values())
        for nd in nodes:
            g.add(PEDescriptor.from_json(nd))
        try:
            for c in doc.get("connections", []):
                g.connect(c["src"], c["src_port"], c["dst"], c["dst_port"])
        except KeyError as e:
            raise InvalidGraph(f"connection is missing {e.args[0]!r}") from None
        g.validate()
        return g


def _check_port(pe: PEDescriptor, port: str, out: bool) -> None:
    is_out = port in pe.outputs
    is_in = pe.input_port(port) is not None
    if out and is_out or (not out) and is_in:
        return
    if is_out or is_in:
        want = "output" if out else "input"
        raise WrongDirection(f"{pe.name}.{port} is not an {want} port", pe=pe.name, port=port)
    raise UnknownPort(f"{pe.name} has no port {port!r}", pe=pe.name, port=port)


def connect(graph: WorkflowGraph, src, src_port: str, dst, dst_port: str) -> WorkflowGraph:
    return graph.connect(src, src_port, dst, dst_port)


def find_roots(graph: WorkflowGraph) -> list[str]:
    """Nodes without incoming connections, in insertion order."""
    targets = {c.dst for c in graph.connections}
    roots = [n for n in graph.nodes if n not in targets]
    if not roots:
        raise NoRoot("graph has no node without inputs")
    return roots


def topological_order(graph: WorkflowGraph) -> list[str]:
    """Kahn's algorithm; ready nodes are taken in insertion order."""
    indeg = {n: 0 for n in graph.nodes}
    for c in graph.connections:
        indeg[c.dst] += 1
    order: list[str] = []
    ready = [n for n in graph.nodes if indeg[n] == 0]
    while ready:
        n = ready.pop(0)
        order.append(n)
        for c in graph.connections:
            if c.src == n:
                indeg[c.dst] -= 1
                if indeg[c.dst] == 0:
                    ready.append(c.dst)
        ready.sort(key=list(graph.nodes).index)
    if len(order) != len(graph.nodes):
        raise CycleDetected("graph contains a cycle")
    return order


def allocate_instances(graph: WorkflowGraph, total_processes: int) -> dict[str, int]:
    """Roots get one instance; the rest is split evenly over the other nodes.

    The remainder goes to the earliest non-root nodes in topological order,
    so a 3-node pipeline with 5 processes gets ``{1, 2, 2}`` and with 6
    processes ``{1, 3, 2}``.
    """
    n = len(graph.nodes)
    if total_processes < n:
        raise TooFewProcesses(
            f"{total_processes} processes cannot host {n} PEs", num=total_processes)
    roots = set(find_roots(graph))
    order = topological_order(graph)
    others = [v for v in order if v not in roots]
    counts = {v: 1 for v in graph.nodes}
    if others:
        share, extra = divmod(total_processes - len(roots), len(others))
        for i, v in enumerate(others):
            counts[v] = share + (1 if i < extra else 0)
    return counts


@dataclass(frozen=True)
class ConcretePlan:
    graph: WorkflowGraph
    mapping: Mapping
    instances: dict[str, int]
    routing: tuple[Grouping, ...]  # aligned with graph.connections
    total_processes: int

    @property
    def connections(self) -> list[Connection]:
        return self.graph.connections

    def senders(self, node: str) -> int:
        """Number of EOS markers a single instance of ``node`` must see."""
        return sum(self.instances[c.src] for c in self.graph.incoming(node))


def compile_plan(graph: WorkflowGraph, mapping="SIMPLE", total_processes: int | None = None) -> ConcretePlan:
    mapping = Mapping.parse(mapping)
    if mapping is Mapping.REDIS:
        raise UnsupportedMapping("the REDIS mapping is reserved but not implemented", process="REDIS")
    graph.validate()
    if mapping is Mapping.SIMPLE:
        counts = {n: 1 for n in graph.nodes}
        total = total_processes if total_processes else 1
    else:
        if total_processes is None:
            raise TooFewProcesses("MULTI mapping needs a process count", num=None)
        counts = allocate_instances(graph, total_processes)
        total = total_processes
    routing = tuple(graph.nodes[c.dst].input_port(c.dst_port).grouping for c in graph.connections)
    return ConcretePlan(graph, mapping, counts, routing, total)


def linear_pipeline(pes: Iterable[PEDescriptor], name: str = "pipeline") -> WorkflowGraph:
    """Chain single-port PEs ``output -> input`` in the given order."""
    g = WorkflowGraph(name=name)
    prev = None
    for pe in pes:
        g.add(pe)
        if prev is not None:
            g.connect(prev, "output", pe.name, "input")
        prev = pe.name
    return g
