"""Intrinsic power and complexity metrics for neural-network graphs."""

__version__ = "0.1.0"

from ._kernels import BACKEND
from .analysis import FitError, FitResult, export_csv, fit_loglog, fit_manifest, fit_power_law, vc_bound
from .estimators import (
    activation_power_oracle, boxfilter_experiment, estimate_activation_power,
    softmax_power_delta, softmax_power_estimate,
)
from .graph_ir import (
    Activation, Add, BatchNorm, Concat, Conv2D, ConvTranspose2D, Dense, Dropout, Flatten,
    GlobalPool, GraphBuilder, GraphError, GraphValidationError, Identity, Input, LayerNode,
    NetworkGraph, Pool2D, infer_shapes, parse_graph, serialize_graph, topological_order,
    validate_graph,
)
from .layer_algebra import (
    DEFAULT_CONFIG, GlobalMetrics, PropagationConfig, analyze, cumulative_curves, global_metrics,
)
from .local_metrics import LocalMetrics, count_params, graph_local_metrics, load_constants
from .model_zoo import build, build_autoencoder, build_mlp, build_plainnet, build_resnet, build_vgg
