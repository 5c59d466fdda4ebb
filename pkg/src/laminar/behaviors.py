"""Runtime behaviour of Processing Elements and the catalog that resolves them.

Behaviour classes follow the familiar dispel4py shape: subclass one of
:class:`ProducerPE`, :class:`IterativePE`, :class:`ConsumerPE` or
:class:`GenericPE` and implement ``_process``. The engine binds an
:class:`InstanceContext` before calling :meth:`ProcessingElement.setup`;
everything a behaviour mutates lives on its own instance.
"""

from __future__ import annotations

import inspect
import textwrap
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

from .dataflow import SHUFFLE, Grouping, InputPort, PEDescriptor, PEKind
from .errors import UnresolvedPE


@dataclass
class InstanceContext:
    node: str
    instance: int
    n_instances: int
    args: dict[str, Any] = field(default_factory=dict)
    workdir: Path | None = None
    emit: Callable[[str, Any], None] = lambda port, value: None
    log: Callable[[str], None] = lambda line: None


class ProcessingElement:
    kind = PEKind.GENERIC
    inputs: tuple[InputPort, ...] = ()
    outputs: tuple[str, ...] = ()
    stateful = False
    imports: tuple[str, ...] = ()

    ctx: InstanceContext

    def bind(self, ctx: InstanceContext) -> None:
        self.ctx = ctx

    def setup(self) -> None:
        """Called once per instance before any data arrives."""

    def process(self, inputs: dict[str, Any] | None) -> None:
        raise NotImplementedError

    def finish(self) -> None:
        """Called once after every upstream sender has finished.

        Stateful PEs may flush accumulated state here with :meth:`write`.
        """

    def write(self, port: str, value: Any) -> None:
        self.ctx.emit(port, value)

    def print(self, *values: Any, sep: str = " ") -> None:
        """Captured replacement for ``print``; lines come back in the run result."""
        self.ctx.log(sep.join(str(v) for v in values))

    @property
    def args(self) -> dict[str, Any]:
        return self.ctx.args

    def resource_path(self, relative: str) -> Path:
        base = self.ctx.workdir if self.ctx.workdir is not None else Path.cwd()
        return base / relative


class ProducerPE(ProcessingElement):
    kind = PEKind.PRODUCER
    outputs = ("output",)

    def process(self, inputs=None):
        result = self._process()
        if result is not None:
            self.write("output", result)

    def _process(self) -> Any:
        raise NotImplementedError


class IterativePE(ProcessingElement):
    kind = PEKind.ITERATIVE
    inputs = (InputPort("input"),)
    outputs = ("output",)

    def process(self, inputs):
        result = self._process(inputs["input"])
        if result is not None:
            self.write("output", result)

    def _process(self, data: Any) -> Any:
        raise NotImplementedError


class ConsumerPE(ProcessingElement):
    kind = PEKind.CONSUMER
    inputs = (InputPort("input"),)

    def process(self, inputs):
        self._process(inputs["input"])

    def _process(self, data: Any) -> None:
        raise NotImplementedError


class GenericPE(ProcessingElement):
    """Free-form PE. ``_process`` may return a ``{port: value}`` dict."""

    kind = PEKind.GENERIC

    def process(self, inputs):
        result = self._process(inputs or {})
        if result:
            for port, value in result.items():
                self.write(port, value)

    def _process(self, inputs: dict[str, Any]) -> dict[str, Any] | None:
        raise NotImplementedError


def grouped(grouping: Grouping | list[int] | None, name: str = "input") -> tuple[InputPort, ...]:
    if grouping is None:
        return (InputPort(name, SHUFFLE),)
    if not isinstance(grouping, Grouping):
        grouping = Grouping(tuple(grouping))
    return (InputPort(name, grouping),)


def pe_source(cls: type) -> str:
    try:
        return textwrap.dedent(inspect.getsource(cls))
    except (OSError, TypeError):
        return f"class {cls.__name__}: ...\n"


def describe(cls: type[ProcessingElement], name: str | None = None,
             source: str | None = None) -> PEDescriptor:
    """Build the static descriptor of a behaviour class."""
    return PEDescriptor(
        name=name or cls.__name__,
        kind=cls.kind,
        inputs=tuple(cls.inputs),
        outputs=tuple(cls.outputs),
        stateful=cls.stateful,
        source=pe_source(cls) if source is None else source,
        imports=tuple(cls.imports),
    )


class Catalog:
    """Name -> factory table used to instantiate PE behaviour.

    Factories must be importable callables (classes, ``functools.partial``
    of classes) when workers are started with the ``spawn`` method; with
    ``fork`` anything goes.
    """

    def __init__(self, entries: dict[str, Callable[[], ProcessingElement]] | None = None):
        self._entries: dict[str, Callable[[], ProcessingElement]] = dict(entries or {})

    def register(self, name_or_factory=None, factory=None):
        if factory is not None:
            self._entries[name_or_factory] = factory
            return factory
        if callable(name_or_factory):
            self._entries[name_or_factory.__name__] = name_or_factory
            return name_or_factory

        def deco(f):
            self._entries[name_or_factory or f.__name__] = f
            return f
        return deco

    def create(self, name: str) -> ProcessingElement:
        try:
            factory = self._entries[name]
        except KeyError:
            raise UnresolvedPE(f"no behaviour registered for PE {name!r}", pe=name) from None
        return factory()

    def missing(self, names) -> list[str]:
        return [n for n in names if n not in self._entries]

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def __iter__(self):
        return iter(self._entries)

    def __len__(self):
        return len(self._entries)

    def copy(self) -> "Catalog":
        return Catalog(self._entries)

    def update(self, other: "Catalog | dict") -> None:
        self._entries.update(other._entries if isinstance(other, Catalog) else other)
