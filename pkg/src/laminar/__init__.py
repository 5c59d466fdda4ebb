"""Laminar: a serverless stream-based dataflow framework.

Workflows of Processing Elements are compiled into parallel plans and run
under the SIMPLE (sequential) or MULTI (multiprocess) mapping. A registry
stores users, PEs and workflows and supports text, semantic and
code-completion search; an HTTP server and a CLI client front it all.
"""

from .behaviors import Catalog, ConsumerPE, GenericPE, IterativePE, ProducerPE, describe
from .dataflow import (
    SHUFFLE,
    ConcretePlan,
    Grouping,
    InputPort,
    Mapping,
    PEDescriptor,
    PEKind,
    WorkflowGraph,
    allocate_instances,
    compile_plan,
    connect,
    find_roots,
    linear_pipeline,
    topological_order,
)
from .engine import Engine, RunResult, check_requirements, execute, materialize_resources, run_parallel, run_simple
from .registry import Registry
from .routing import canonical_encode, route, stable_hash
from .search import (
    FallbackProvider,
    HttpProvider,
    code_completion_search,
    cosine,
    fallback_embed,
    normalize_text,
    semantic_search,
    text_search,
)

__version__ = "0.1.0"
