"""PE source files and import scanning.

A PE source file is ordinary Python preceded by a ``#@`` header that states
what the client would otherwise learn by importing the class::

    #@ pe: CountWords
    #@ kind: Generic
    #@ input: input groupby=0
    #@ output: output
    #@ stateful: true

``input`` and ``output`` may repeat. A grouping is ``shuffle`` (default) or
``groupby=i,j``. The header is read without executing any code.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

from .dataflow import SHUFFLE, Grouping, InputPort, PEDescriptor, PEKind
from .errors import InvalidDescriptor

_IMPORT = re.compile(r"^\s*import\s+(.+)$")
_FROM = re.compile(r"^\s*from\s+([\w.]+)\s+import\b")


def scan_imports(source: str) -> list[str]:
    """Root module names of every ``import``/``from ... import`` line."""
    roots = set()
    for line in source.splitlines():
        line = line.split("#", 1)[0]
        m = _FROM.match(line)
        if m:
            root = m.group(1).split(".")[0]
            if root:
                roots.add(root)
            continue
        m = _IMPORT.match(line)
        if m:
            for part in m.group(1).split(","):
                name = part.strip().split(" as ")[0].strip()
                root = name.split(".")[0]
                if root.isidentifier():
                    roots.add(root)
    return sorted(roots)


@dataclass(frozen=True)
class PESourceFile:
    path: Path | None
    descriptor: PEDescriptor
    source: str

    @property
    def imports(self) -> tuple[str, ...]:
        return self.descriptor.imports


def _parse_grouping(spec: str) -> Grouping:
    spec = spec.strip()
    if not spec or spec == "shuffle":
        return SHUFFLE
    if spec.startswith("groupby="):
        try:
            return Grouping(tuple(int(i) for i in spec[len("groupby="):].split(",")))
        except ValueError:
            raise InvalidDescriptor(f"bad group-by spec {spec!r}", grouping=spec) from None
    raise InvalidDescriptor(f"bad grouping {spec!r}", grouping=spec)


def parse_pe_source(source: str, path: Path | None = None) -> PESourceFile:
    fields: dict[str, str] = {}
    inputs: list[InputPort] = []
    outputs: list[str] = []
    for line in source.splitlines():
        stripped = line.strip()
        if not stripped.startswith("#@"):
            continue
        key, sep, value = stripped[2:].partition(":")
        if not sep:
            raise InvalidDescriptor(f"malformed header line {stripped!r}", line=stripped)
        key, value = key.strip().lower(), value.strip()
        if key == "input":
            name, _, grouping = value.partition(" ")
            inputs.append(InputPort(name, _parse_grouping(grouping)))
        elif key == "output":
            outputs.append(value)
        else:
            fields[key] = value
    if "pe" not in fields:
        raise InvalidDescriptor("PE source has no '#@ pe:' header", path=str(path or ""))
    try:
        kind = PEKind(fields.get("kind", "Generic"))
    except ValueError:
        raise InvalidDescriptor(f"unknown PE kind {fields['kind']!r}", kind=fields["kind"]) from None
    # single-port kinds get their fixed ports when the header omits them
    if kind in (PEKind.ITERATIVE, PEKind.CONSUMER) and not inputs:
        inputs = [InputPort("input")]
    if kind in (PEKind.PRODUCER, PEKind.ITERATIVE) and not outputs:
        outputs = ["output"]
    descriptor = PEDescriptor(
        name=fields["pe"],
        kind=kind,
        inputs=tuple(inputs),
        outputs=tuple(outputs),
        stateful=fields.get("stateful", "false").lower() in ("1", "true", "yes"),
        source=source,
        imports=tuple(scan_imports(source)),
    )
    return PESourceFile(path, descriptor, source)


def load_pe_file(path: str | Path) -> PESourceFile:
    path = Path(path)
    return parse_pe_source(path.read_text(encoding="utf-8"), path)


def render_header(descriptor: PEDescriptor) -> str:
    lines = [f"#@ pe: {descriptor.name}", f"#@ kind: {descriptor.kind.value}"]
    for p in descriptor.inputs:
        g = "" if p.grouping.is_shuffle else " groupby=" + ",".join(map(str, p.grouping.indices))
        lines.append(f"#@ input: {p.name}{g}")
    lines += [f"#@ output: {o}" for o in descriptor.outputs]
    if descriptor.stateful:
        lines.append("#@ stateful: true")
    return "\n".join(lines) + "\n"
