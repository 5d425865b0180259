"""Local intrinsic power and complexity of individual layers.

Kernel-type layers (conv, transpose conv, pooling, dense) get
``p = output volume / input volume`` and ``c = log2(operator size)``.
Activations use fixed constants, with complexity taken as the inverse of
power.  Batch norm, dropout, merges, flatten and identity are neutral.

``kernel_span`` controls what the kernel size K covers for convolutions:

* ``"volume"`` (default): ``K = k_h * k_w * c_in``, the full receptive field
  of one filter.
* ``"spatial"``: ``K = k_h * k_w``, input channels ignored.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

from .graph_ir import NetworkGraph, Shape, ensure_shapes, topological_order

KERNEL_SPANS = ("volume", "spatial")


@dataclass(frozen=True)
class LocalMetrics:
    p_local: float
    c_local: float
    neutral: bool = False

    def __post_init__(self):
        if not self.p_local > 0:
            raise ValueError(f"p_local must be positive, got {self.p_local}")
        if not self.c_local >= 0:
            raise ValueError(f"c_local must be non-negative, got {self.c_local}")
        if self.neutral and (self.p_local != 1.0 or self.c_local != 0.0):
            raise ValueError("neutral metrics must be (1, 0)")


NEUTRAL = LocalMetrics(1.0, 0.0, neutral=True)

_RELU = LocalMetrics(0.584, 1.713)

DEFAULT_ACTIVATION_CONSTANTS: dict[str, LocalMetrics] = {
    "relu": _RELU,
    # ReLU variants share the ReLU constants
    "elu": _RELU,
    "leaky_relu": _RELU,
    "swish": _RELU,
    "tanh": LocalMetrics(0.628, 1.592),
    "sigmoid": LocalMetrics(0.208, 4.802),
    "softmax": LocalMetrics(1.342e-05, 7.454e4),
    "linear": NEUTRAL,
}


def load_constants(path: str | Path | None = None) -> dict[str, LocalMetrics]:
    """Default activation constants, optionally overridden from a JSON file.

    The file maps function names to ``{"p": float, "c": float}``.
    """
    constants = dict(DEFAULT_ACTIVATION_CONSTANTS)
    if path is None:
        return constants
    raw = json.loads(Path(path).read_text())
    if not isinstance(raw, dict):
        raise ValueError("constants file must hold a JSON object")
    for fn, entry in raw.items():
        if fn not in constants:
            raise ValueError(f"unknown activation {fn!r} in constants file")
        if not isinstance(entry, dict) or set(entry) != {"p", "c"}:
            raise ValueError(f"constants entry for {fn!r} must be {{'p': .., 'c': ..}}")
        p, c = float(entry["p"]), float(entry["c"])
        constants[fn] = NEUTRAL if (p == 1.0 and c == 0.0) else LocalMetrics(p, c)
    return constants


def _spatial_size(shape: Shape) -> int:
    return shape[0] * shape[1]


def _kernel_size(kernel_h, kernel_w, in_shape, kernel_span):
    if kernel_span == "spatial":
        return kernel_h * kernel_w
    if kernel_span == "volume":
        return kernel_h * kernel_w * in_shape[2]
    raise ValueError(f"kernel_span must be one of {KERNEL_SPANS}, got {kernel_span!r}")


def conv_metrics(kernel_h, kernel_w, filters, in_shape, out_shape, kernel_span="volume") -> LocalMetrics:
    k = _kernel_size(kernel_h, kernel_w, in_shape, kernel_span)
    s_in = _spatial_size(in_shape)
    s_out = _spatial_size(out_shape)
    c_out = 1  # output connections per filter position
    p = filters * (c_out * s_out) / (k * s_in)
    return LocalMetrics(p, filters * math.log2(k))


def transpose_conv_metrics(kernel_h, kernel_w, filters, in_shape, out_shape, kernel_span="volume") -> LocalMetrics:
    """Transpose convolution: each input position fans out to K outputs.

    With ``kernel_span="volume"`` the ``c_in`` input channels feed every output
    connection, so they sit in the denominator; a conv/transpose-conv pair with
    mirrored hyperparameters then has unit combined power.
    """
    k_sp = kernel_h * kernel_w
    c_in = in_shape[2] if kernel_span == "volume" else 1
    k_op = _kernel_size(kernel_h, kernel_w, in_shape, kernel_span)
    s_in = _spatial_size(in_shape)
    s_out = _spatial_size(out_shape)
    p = filters * (k_sp * s_out) / (c_in * s_in)
    return LocalMetrics(p, filters * math.log2(k_op))


def pool_metrics(mode, kernel_h, kernel_w, in_shape, out_shape) -> LocalMetrics:
    # pooling acts per channel with a single fixed filter; mode is irrelevant
    k = kernel_h * kernel_w
    p = _spatial_size(out_shape) / (k * _spatial_size(in_shape))
    return LocalMetrics(p, math.log2(k))


def global_pool_metrics(in_shape) -> LocalMetrics:
    s_in = _spatial_size(in_shape)
    return LocalMetrics(1.0 / (s_in * s_in), math.log2(s_in))


def dense_metrics(d_in: int, d_out: int) -> LocalMetrics:
    return LocalMetrics(d_out / d_in, math.log2(d_out * d_in))


def activation_metrics(fn: str, constants: Mapping[str, LocalMetrics] | None = None) -> LocalMetrics:
    table = DEFAULT_ACTIVATION_CONSTANTS if constants is None else constants
    return table[fn]


def neutral_metrics(kind: str) -> LocalMetrics:
    if kind not in ("batch_norm", "dropout", "add", "concat", "flatten", "identity", "input"):
        raise ValueError(f"{kind} is not a neutral layer kind")
    return NEUTRAL


def node_metrics(node, graph: NetworkGraph, constants=None, kernel_span="volume") -> LocalMetrics:
    op = node.op
    kind = node.kind
    if kind == "activation":
        return activation_metrics(op.fn, constants)
    if kind in ("batch_norm", "dropout", "add", "concat", "flatten", "identity", "input"):
        return NEUTRAL
    in_shape = graph.in_shape(node.id)
    out_shape = node.out_shape
    if in_shape is None or out_shape is None:
        raise ValueError(f"node {node.id}: shapes not inferred")
    if kind == "conv2d":
        return conv_metrics(op.kernel_h, op.kernel_w, op.filters, in_shape, out_shape, kernel_span)
    if kind == "conv_transpose2d":
        return transpose_conv_metrics(op.kernel_h, op.kernel_w, op.filters, in_shape, out_shape, kernel_span)
    if kind == "pool2d":
        return pool_metrics(op.mode, op.kernel_h, op.kernel_w, in_shape, out_shape)
    if kind == "global_pool":
        return global_pool_metrics(in_shape)
    if kind == "dense":
        return dense_metrics(in_shape[0], out_shape[0])
    raise RuntimeError(f"no metric rule for layer kind {kind!r}")


def graph_local_metrics(graph: NetworkGraph, constants=None, kernel_span="volume") -> dict[str, LocalMetrics]:
    """Local metrics for every node, keyed by id in topological order."""
    graph = ensure_shapes(graph)
    return {
        nid: node_metrics(graph.node(nid), graph, constants, kernel_span)
        for nid in topological_order(graph)
    }


def count_params(graph: NetworkGraph) -> int:
    """Trainable parameters: conv/dense weights and biases, batch-norm scale and shift."""
    graph = ensure_shapes(graph)
    total = 0
    for node in graph.nodes:
        op = node.op
        kind = node.kind
        if kind in ("conv2d", "conv_transpose2d"):
            c_in = graph.in_shape(node.id)[2]
            total += (op.kernel_h * op.kernel_w * c_in + int(op.bias)) * op.filters
        elif kind == "dense":
            d_in = graph.in_shape(node.id)[0]
            total += (d_in + int(op.bias)) * op.units
        elif kind == "batch_norm":
            total += 2 * node.out_shape[-1]
    return total
