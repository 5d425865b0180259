"""Architecture graph IR.

A network is a DAG of :class:`LayerNode` objects, each wrapping one layer
kind (a small frozen dataclass holding that kind's hyperparameters).  Graphs
are immutable; shape inference returns a new graph with ``out_shape`` filled.

Shapes are plain tuples of positive ints: ``(h, w, c)`` for images and
``(d,)`` for flat vectors.
"""

from __future__ import annotations

import dataclasses
import heapq
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, ClassVar, Iterable, Union

Shape = tuple[int, ...]
Padding = Union[str, tuple[int, int]]

ACTIVATION_FNS = ("relu", "elu", "leaky_relu", "swish", "tanh", "sigmoid", "softmax", "linear")
POOL_MODES = ("max", "avg")


class GraphError(ValueError):
    """Base class for graph construction and analysis errors."""


class GraphParseError(GraphError):
    pass


class ShapeError(GraphError):
    pass


class GraphCycleError(GraphError):
    pass


class GraphValidationError(GraphError):
    def __init__(self, report: "ValidationReport"):
        self.report = report
        super().__init__("; ".join(str(v) for v in report.violations))


def _check_positive(op, *names):
    for name in names:
        value = getattr(op, name)
        if isinstance(value, bool) or not isinstance(value, int) or value < 1:
            raise ValueError(f"{name} must be a positive integer, got {value!r}")


def _check_padding(padding):
    if padding in ("same", "valid"):
        return
    if (
        isinstance(padding, tuple)
        and len(padding) == 2
        and all(isinstance(p, int) and not isinstance(p, bool) and p >= 0 for p in padding)
    ):
        return
    raise ValueError(f"padding must be 'same', 'valid' or (p_h, p_w), got {padding!r}")


# --- layer kinds -----------------------------------------------------------


@dataclass(frozen=True)
class Input:
    tag: ClassVar[str] = "input"


@dataclass(frozen=True)
class Conv2D:
    kernel_h: int
    kernel_w: int
    filters: int
    stride: int = 1
    padding: Padding = "valid"
    bias: bool = True
    tag: ClassVar[str] = "conv2d"

    def __post_init__(self):
        _check_positive(self, "kernel_h", "kernel_w", "filters", "stride")
        _check_padding(self.padding)


@dataclass(frozen=True)
class ConvTranspose2D:
    kernel_h: int
    kernel_w: int
    filters: int
    stride: int = 1
    padding: Padding = "valid"
    bias: bool = True
    tag: ClassVar[str] = "conv_transpose2d"

    def __post_init__(self):
        _check_positive(self, "kernel_h", "kernel_w", "filters", "stride")
        _check_padding(self.padding)


@dataclass(frozen=True)
class Pool2D:
    mode: str
    kernel_h: int
    kernel_w: int
    stride: int
    padding: Padding = "valid"
    tag: ClassVar[str] = "pool2d"

    def __post_init__(self):
        if self.mode not in POOL_MODES:
            raise ValueError(f"mode must be one of {POOL_MODES}, got {self.mode!r}")
        _check_positive(self, "kernel_h", "kernel_w", "stride")
        _check_padding(self.padding)


@dataclass(frozen=True)
class GlobalPool:
    mode: str = "avg"
    tag: ClassVar[str] = "global_pool"

    def __post_init__(self):
        if self.mode not in POOL_MODES:
            raise ValueError(f"mode must be one of {POOL_MODES}, got {self.mode!r}")


@dataclass(frozen=True)
class Dense:
    units: int
    bias: bool = True
    tag: ClassVar[str] = "dense"

    def __post_init__(self):
        _check_positive(self, "units")


@dataclass(frozen=True)
class Activation:
    fn: str
    tag: ClassVar[str] = "activation"

    def __post_init__(self):
        if self.fn not in ACTIVATION_FNS:
            raise ValueError(f"fn must be one of {ACTIVATION_FNS}, got {self.fn!r}")


@dataclass(frozen=True)
class BatchNorm:
    tag: ClassVar[str] = "batch_norm"


@dataclass(frozen=True)
class Dropout:
    rate: float
    tag: ClassVar[str] = "dropout"

    def __post_init__(self):
        if isinstance(self.rate, bool) or not isinstance(self.rate, (int, float)):
            raise ValueError(f"rate must be a number, got {self.rate!r}")
        if not 0 <= self.rate < 1:
            raise ValueError(f"rate must be in [0, 1), got {self.rate!r}")


@dataclass(frozen=True)
class Add:
    tag: ClassVar[str] = "add"


@dataclass(frozen=True)
class Concat:
    tag: ClassVar[str] = "concat"


@dataclass(frozen=True)
class Flatten:
    tag: ClassVar[str] = "flatten"


@dataclass(frozen=True)
class Identity:
    tag: ClassVar[str] = "identity"


LayerKind = Union[
    Input, Conv2D, ConvTranspose2D, Pool2D, GlobalPool, Dense, Activation,
    BatchNorm, Dropout, Add, Concat, Flatten, Identity,
]

KINDS: dict[str, type] = {
    cls.tag: cls
    for cls in (
        Input, Conv2D, ConvTranspose2D, Pool2D, GlobalPool, Dense, Activation,
        BatchNorm, Dropout, Add, Concat, Flatten, Identity,
    )
}

MERGE_KINDS = ("add", "concat")


@dataclass(frozen=True)
class LayerNode:
    id: str
    op: LayerKind
    inputs: tuple[str, ...] = ()
    out_shape: Shape | None = field(default=None, compare=False)

    @property
    def kind(self) -> str:
        return self.op.tag


@dataclass(frozen=True)
class NetworkGraph:
    name: str
    input_shape: Shape
    nodes: tuple[LayerNode, ...]

    @cached_property
    def _index(self) -> dict[str, int]:
        return {n.id: i for i, n in enumerate(self.nodes)}

    def node(self, node_id: str) -> LayerNode:
        return self.nodes[self._index[node_id]]

    def position(self, node_id: str) -> int:
        return self._index[node_id]

    @cached_property
    def consumers(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = {n.id: [] for n in self.nodes}
        for n in self.nodes:
            for src in n.inputs:
                if src in out:
                    out[src].append(n.id)
        return out

    @property
    def sinks(self) -> list[str]:
        return [nid for nid, users in self.consumers.items() if not users]

    @property
    def sink(self) -> str:
        (only,) = self.sinks
        return only

    def in_shape(self, node_id: str) -> Shape:
        """Output shape of the sole producer feeding ``node_id``."""
        node = self.node(node_id)
        if node.kind == "input":
            return self.input_shape
        return self.node(node.inputs[0]).out_shape

    def with_nodes(self, nodes: Iterable[LayerNode]) -> "NetworkGraph":
        return dataclasses.replace(self, nodes=tuple(nodes))


# --- JSON interchange ------------------------------------------------------


def _param_to_json(value):
    if isinstance(value, tuple):
        return list(value)
    return value


def _param_from_json(node_id, name, value):
    if name == "padding" and isinstance(value, list):
        if len(value) != 2:
            raise GraphParseError(f"node {node_id}: field 'padding' must have two entries")
        return tuple(value)
    return value


def op_params(op: LayerKind) -> dict[str, Any]:
    return {f.name: _param_to_json(getattr(op, f.name)) for f in dataclasses.fields(op)}


def make_op(kind: str, params: dict[str, Any], node_id: str = "?") -> LayerKind:
    try:
        cls = KINDS[kind]
    except KeyError:
        raise GraphParseError(f"node {node_id}: unknown kind {kind!r}") from None
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(params) - names)
    if unknown:
        raise GraphParseError(f"node {node_id}: unknown field {unknown[0]!r}")
    for f in dataclasses.fields(cls):
        if f.default is dataclasses.MISSING and f.name not in params:
            raise GraphParseError(f"node {node_id}: missing required field {f.name!r}")
    kwargs = {k: _param_from_json(node_id, k, v) for k, v in params.items()}
    try:
        return cls(**kwargs)
    except ValueError as exc:
        raise GraphParseError(f"node {node_id}: {exc}") from None


def _expect_keys(obj, required, where):
    if not isinstance(obj, dict):
        raise GraphParseError(f"{where}: expected an object")
    unknown = sorted(set(obj) - set(required))
    if unknown:
        raise GraphParseError(f"{where}: unknown field {unknown[0]!r}")
    missing = [k for k in required if k not in obj]
    if missing:
        raise GraphParseError(f"{where}: missing required field {missing[0]!r}")


def parse_graph(text: str) -> NetworkGraph:
    """Parse a JSON IR document.  Shapes are left unset."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GraphParseError(f"malformed JSON: {exc}") from None
    _expect_keys(doc, ("name", "input_shape", "nodes"), "document")
    shape = doc["input_shape"]
    if (
        not isinstance(shape, list)
        or not 1 <= len(shape) <= 4
        or not all(isinstance(d, int) and not isinstance(d, bool) and d >= 1 for d in shape)
    ):
        raise GraphParseError(f"document: invalid input_shape {shape!r}")
    if not isinstance(doc["nodes"], list):
        raise GraphParseError("document: 'nodes' must be an array")

    nodes = []
    seen = set()
    for i, raw in enumerate(doc["nodes"]):
        where = f"node #{i}"
        if isinstance(raw, dict) and isinstance(raw.get("id"), str):
            where = f"node {raw['id']}"
        _expect_keys(raw, ("id", "kind", "params", "inputs"), where)
        node_id = raw["id"]
        if not isinstance(node_id, str) or not node_id:
            raise GraphParseError(f"{where}: field 'id' must be a non-empty string")
        if node_id in seen:
            raise GraphParseError(f"duplicate id {node_id}")
        seen.add(node_id)
        if not isinstance(raw["params"], dict):
            raise GraphParseError(f"node {node_id}: field 'params' must be an object")
        inputs = raw["inputs"]
        if not isinstance(inputs, list) or not all(isinstance(s, str) for s in inputs):
            raise GraphParseError(f"node {node_id}: field 'inputs' must be an array of ids")
        op = make_op(raw["kind"], raw["params"], node_id)
        nodes.append(LayerNode(node_id, op, tuple(inputs)))
    return NetworkGraph(str(doc["name"]), tuple(shape), tuple(nodes))


def graph_to_dict(g: NetworkGraph) -> dict[str, Any]:
    return {
        "name": g.name,
        "input_shape": list(g.input_shape),
        "nodes": [
            {"id": n.id, "kind": n.kind, "params": op_params(n.op), "inputs": list(n.inputs)}
            for n in g.nodes
        ],
    }


def serialize_graph(g: NetworkGraph) -> str:
    return json.dumps(graph_to_dict(g), indent=2) + "\n"


# --- validation ------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    kind: str  # cycle | multi_sink | arity | dangling | duplicate_id | input_count | shape
    node_id: str | None
    message: str

    def __str__(self):
        where = f" at {self.node_id}" if self.node_id else ""
        return f"{self.kind}{where}: {self.message}"


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def kinds(self) -> set[str]:
        return {v.kind for v in self.violations}


def _arity_ok(node: LayerNode) -> bool:
    n = len(node.inputs)
    if node.kind == "input":
        return n == 0
    if node.kind in MERGE_KINDS:
        return n >= 2
    return n == 1


def validate_graph(g: NetworkGraph) -> ValidationReport:
    out: list[Violation] = []
    if not 1 <= len(g.input_shape) <= 4 or any(d < 1 for d in g.input_shape):
        out.append(Violation("shape", None, f"invalid input_shape {g.input_shape}"))

    ids = [n.id for n in g.nodes]
    seen: set[str] = set()
    for nid in ids:
        if nid in seen:
            out.append(Violation("duplicate_id", nid, f"duplicate id {nid}"))
        seen.add(nid)

    n_inputs = sum(1 for n in g.nodes if n.kind == "input")
    if n_inputs != 1:
        out.append(Violation("input_count", None, f"expected exactly one input node, found {n_inputs}"))

    for n in g.nodes:
        if not _arity_ok(n):
            out.append(Violation("arity", n.id, f"{n.kind} node has {len(n.inputs)} inputs"))
        for src in n.inputs:
            if src not in seen:
                out.append(Violation("dangling", n.id, f"unknown input {src}"))

    try:
        topological_order(g)
    except GraphCycleError as exc:
        out.append(Violation("cycle", None, str(exc)))

    if g.nodes:
        sinks = g.sinks
        if len(sinks) != 1:
            out.append(Violation("multi_sink", None, f"expected one sink, found {sinks}"))
    return ValidationReport(tuple(out))


# --- traversal -------------------------------------------------------------


def topological_order(g: NetworkGraph) -> list[str]:
    """Kahn's algorithm; among ready nodes the earliest-declared goes first."""
    pos = {n.id: i for i, n in enumerate(g.nodes)}
    indeg = {n.id: sum(1 for s in n.inputs if s in pos) for n in g.nodes}
    ready = [pos[nid] for nid, d in indeg.items() if d == 0]
    heapq.heapify(ready)
    order = []
    consumers = g.consumers
    while ready:
        nid = g.nodes[heapq.heappop(ready)].id
        order.append(nid)
        for user in consumers[nid]:
            indeg[user] -= 1
            if indeg[user] == 0:
                heapq.heappush(ready, pos[user])
    if len(order) != len(pos):
        stuck = sorted((nid for nid in pos if indeg[nid] > 0), key=pos.get)
        raise GraphCycleError(f"cycle through {stuck}")
    return order


def depth_index(g: NetworkGraph) -> dict[str, int]:
    depth: dict[str, int] = {}
    for nid in topological_order(g):
        node = g.node(nid)
        depth[nid] = 1 + max((depth[s] for s in node.inputs), default=-1)
    return depth


# --- shape inference -------------------------------------------------------


def resolve_padding(padding: Padding, kernel_h: int, kernel_w: int) -> tuple[int, int]:
    if padding == "valid":
        return (0, 0)
    if padding == "same":
        if kernel_h % 2 == 0 or kernel_w % 2 == 0:
            raise ShapeError(f"'same' padding needs odd kernel dims, got {kernel_h}x{kernel_w}")
        return (kernel_h // 2, kernel_w // 2)
    return padding


def _window_out(size, kernel, stride, pad):
    return (size + 2 * pad - kernel) // stride + 1


def _spatial(node: LayerNode, shape: Shape) -> Shape:
    if len(shape) != 3:
        raise ShapeError(f"node {node.id}: {node.kind} needs an (h, w, c) input, got {shape}")
    return shape


def _infer_node(node: LayerNode, in_shapes: list[Shape]) -> Shape:
    op = node.op
    kind = node.kind
    if kind in ("activation", "batch_norm", "dropout", "identity"):
        return in_shapes[0]
    if kind == "flatten":
        return (math.prod(in_shapes[0]),)
    if kind in ("conv2d", "pool2d"):
        h, w, c = _spatial(node, in_shapes[0])
        ph, pw = resolve_padding(op.padding, op.kernel_h, op.kernel_w)
        oh = _window_out(h, op.kernel_h, op.stride, ph)
        ow = _window_out(w, op.kernel_w, op.stride, pw)
        oc = op.filters if kind == "conv2d" else c
        out = (oh, ow, oc)
    elif kind == "conv_transpose2d":
        h, w, _ = _spatial(node, in_shapes[0])
        ph, pw = resolve_padding(op.padding, op.kernel_h, op.kernel_w)
        out = (
            (h - 1) * op.stride - 2 * ph + op.kernel_h,
            (w - 1) * op.stride - 2 * pw + op.kernel_w,
            op.filters,
        )
    elif kind == "global_pool":
        out = (_spatial(node, in_shapes[0])[2],)
    elif kind == "dense":
        if len(in_shapes[0]) != 1:
            raise ShapeError(f"node {node.id}: dense needs a flat input (insert flatten), got {in_shapes[0]}")
        out = (op.units,)
    elif kind == "add":
        if any(s != in_shapes[0] for s in in_shapes):
            raise ShapeError(f"node {node.id}: add inputs differ in shape: {in_shapes}")
        out = in_shapes[0]
    elif kind == "concat":
        ranks = {len(s) for s in in_shapes}
        if len(ranks) != 1:
            raise ShapeError(f"node {node.id}: concat inputs differ in rank: {in_shapes}")
        if any(s[:-1] != in_shapes[0][:-1] for s in in_shapes):
            raise ShapeError(f"node {node.id}: concat inputs differ in spatial dims: {in_shapes}")
        out = in_shapes[0][:-1] + (sum(s[-1] for s in in_shapes),)
    else:  # pragma: no cover - input handled by caller
        raise ShapeError(f"node {node.id}: cannot infer shape for {kind}")
    if any(d < 1 for d in out):
        raise ShapeError(f"node {node.id}: non-positive inferred dim {out}")
    return out


def infer_shapes(g: NetworkGraph) -> NetworkGraph:
    report = validate_graph(g)
    if not report.ok:
        raise GraphValidationError(report)
    shapes: dict[str, Shape] = {}
    for nid in topological_order(g):
        node = g.node(nid)
        if node.kind == "input":
            shapes[nid] = tuple(g.input_shape)
        else:
            shapes[nid] = _infer_node(node, [shapes[s] for s in node.inputs])
    return g.with_nodes(dataclasses.replace(n, out_shape=shapes[n.id]) for n in g.nodes)


def ensure_shapes(g: NetworkGraph) -> NetworkGraph:
    if all(n.out_shape is not None for n in g.nodes):
        return g
    return infer_shapes(g)


class GraphBuilder:
    """Sequential helper used by the model zoo and tests.

    ``add`` appends a node and returns its id; ``inputs`` defaults to the
    previously added node.
    """

    def __init__(self, name: str, input_shape: Shape):
        self.name = name
        self.input_shape = tuple(input_shape)
        self.nodes: list[LayerNode] = [LayerNode("input", Input())]
        self._counts: dict[str, int] = {}

    @property
    def last(self) -> str:
        return self.nodes[-1].id

    def add(self, op: LayerKind, inputs: Iterable[str] | str | None = None, id: str | None = None) -> str:
        if inputs is None:
            inputs = (self.last,)
        elif isinstance(inputs, str):
            inputs = (inputs,)
        if id is None:
            k = self._counts.get(op.tag, 0) + 1
            self._counts[op.tag] = k
            id = f"{op.tag}_{k}"
        self.nodes.append(LayerNode(id, op, tuple(inputs)))
        return id

    def build(self, infer: bool = True) -> NetworkGraph:
        g = NetworkGraph(self.name, self.input_shape, tuple(self.nodes))
        return infer_shapes(g) if infer else g
