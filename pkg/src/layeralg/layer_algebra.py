"""Propagation of local metrics over a network DAG.

Power: the input signal is 1, every node multiplies by its local power, a
fan-out hands the same value to each consumer and a merge keeps the largest
incoming value (or their sum with ``power_merge="sum"``).

Complexity: in ``multiplicative`` mode the running value starts at 1 and is
multiplied by each non-neutral node's local complexity; merges add the
incoming values.  Products over hundreds of layers overflow float64, so the
value is carried as log2 and merges use ``logaddexp2``.  A local complexity
below 1 is treated as a factor of 1.  In ``additive`` mode local complexities
are summed along paths and merges add.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .graph_ir import NetworkGraph, depth_index, ensure_shapes, topological_order
from .local_metrics import KERNEL_SPANS, LocalMetrics, count_params, graph_local_metrics

COMPLEXITY_MODES = ("multiplicative", "additive")
POWER_MERGES = ("max", "sum")

CURVE_HEADER = ("node_id", "depth", "kind", "p_local", "c_local", "P_cum", "log2_C_cum")


@dataclass(frozen=True)
class PropagationConfig:
    complexity_mode: str = "multiplicative"
    power_merge: str = "max"
    kernel_span: str = "volume"

    def __post_init__(self):
        if self.complexity_mode not in COMPLEXITY_MODES:
            raise ValueError(f"complexity_mode must be one of {COMPLEXITY_MODES}")
        if self.power_merge not in POWER_MERGES:
            raise ValueError(f"power_merge must be one of {POWER_MERGES}")
        if self.kernel_span not in KERNEL_SPANS:
            raise ValueError(f"kernel_span must be one of {KERNEL_SPANS}")


DEFAULT_CONFIG = PropagationConfig()


def propagate_power(graph: NetworkGraph, local: Mapping[str, LocalMetrics],
                    config: PropagationConfig = DEFAULT_CONFIG) -> dict[str, float]:
    cum: dict[str, float] = {}
    for nid in topological_order(graph):
        incoming = [cum[s] for s in graph.node(nid).inputs]
        if not incoming:
            p_in = 1.0
        elif len(incoming) == 1:
            p_in = incoming[0]
        elif config.power_merge == "max":
            p_in = max(incoming)
        else:
            p_in = math.fsum(incoming)
        cum[nid] = p_in * local[nid].p_local
    return cum


def propagate_complexity(graph: NetworkGraph, local: Mapping[str, LocalMetrics],
                         config: PropagationConfig = DEFAULT_CONFIG) -> dict[str, float]:
    """Cumulative complexity per node.

    Values are log2 of the cumulative complexity in multiplicative mode and
    the plain running sum in additive mode.
    """
    multiplicative = config.complexity_mode == "multiplicative"
    cum: dict[str, float] = {}
    for nid in topological_order(graph):
        incoming = [cum[s] for s in graph.node(nid).inputs]
        m = local[nid]
        if multiplicative:
            if not incoming:
                c_in = 0.0  # log2 of the unit source
            elif len(incoming) == 1:
                c_in = incoming[0]
            else:
                c_in = float(np.logaddexp2.reduce(incoming))
            step = 0.0 if m.neutral or m.c_local <= 1.0 else math.log2(m.c_local)
            cum[nid] = c_in + step
        else:
            if not incoming:
                c_in = 0.0
            elif len(incoming) == 1:
                c_in = incoming[0]
            else:
                c_in = math.fsum(incoming)
            cum[nid] = c_in + m.c_local
    return cum


def global_sum(local: Mapping[str, LocalMetrics]) -> tuple[float, float]:
    """Topology-blind sums ``(gsip, gsc)`` of the local values."""
    gsip = 0.0
    gsc = 0.0
    for m in local.values():
        gsip += m.p_local
        gsc += m.c_local
    return gsip, gsc


@dataclass(frozen=True)
class GlobalMetrics:
    gcip: float
    gsip: float
    log2_gcc: float
    gsc: float
    log2_gwc: float
    equivalent_layers: int
    params: int
    complexity_mode: str = "multiplicative"
    power_merge: str = "max"
    extra: dict = field(default_factory=dict, compare=False, repr=False)

    def to_dict(self) -> dict:
        def finite(x):
            return x if math.isfinite(x) else None

        return {
            "gcip": self.gcip,
            "gsip": self.gsip,
            "log2_gcc": finite(self.log2_gcc),
            "gsc": self.gsc,
            "log2_gwc": finite(self.log2_gwc),
            "equivalent_layers": self.equivalent_layers,
            "params": self.params,
            "complexity_mode": self.complexity_mode,
            "power_merge": self.power_merge,
        }


def _log2_or_neg_inf(x: float) -> float:
    return math.log2(x) if x > 0 else -math.inf


@dataclass(frozen=True)
class Analysis:
    """Everything computed for one graph in a single pass."""

    graph: NetworkGraph
    config: PropagationConfig
    local: dict[str, LocalMetrics]
    power: dict[str, float]
    complexity: dict[str, float]
    metrics: GlobalMetrics


def analyze(graph: NetworkGraph, config: PropagationConfig = DEFAULT_CONFIG, constants=None) -> Analysis:
    graph = ensure_shapes(graph)
    local = graph_local_metrics(graph, constants, config.kernel_span)
    power = propagate_power(graph, local, config)
    complexity = propagate_complexity(graph, local, config)
    gsip, gsc = global_sum(local)
    sink = graph.sink
    if config.complexity_mode == "multiplicative":
        log2_gcc = complexity[sink]
    else:
        log2_gcc = _log2_or_neg_inf(complexity[sink])
    log2_gwc = log2_gcc + math.log2(gsc) if gsc > 0 else -math.inf
    metrics = GlobalMetrics(
        gcip=power[sink],
        gsip=gsip,
        log2_gcc=log2_gcc,
        gsc=gsc,
        log2_gwc=log2_gwc,
        equivalent_layers=sum(1 for n in graph.nodes if n.kind != "input"),
        params=count_params(graph),
        complexity_mode=config.complexity_mode,
        power_merge=config.power_merge,
    )
    return Analysis(graph, config, local, power, complexity, metrics)


def global_metrics(graph: NetworkGraph, config: PropagationConfig = DEFAULT_CONFIG, constants=None) -> GlobalMetrics:
    return analyze(graph, config, constants).metrics


def cumulative_curves(graph: NetworkGraph, config: PropagationConfig = DEFAULT_CONFIG,
                      constants=None, analysis: Analysis | None = None) -> list[tuple]:
    """Rows of CURVE_HEADER ordered by (depth, topological position)."""
    a = analysis if analysis is not None else analyze(graph, config, constants)
    depth = depth_index(a.graph)
    topo = {nid: i for i, nid in enumerate(topological_order(a.graph))}
    rows = []
    for nid in sorted(topo, key=lambda n: (depth[n], topo[n])):
        m = a.local[nid]
        rows.append((nid, depth[nid], a.graph.node(nid).kind, m.p_local, m.c_local,
                     a.power[nid], a.complexity[nid]))
    return rows
