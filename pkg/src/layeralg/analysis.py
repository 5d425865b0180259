"""Cross-model analysis: power-law fits, VC-dimension bound, CSV export."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from .graph_ir import NetworkGraph
from .layer_algebra import DEFAULT_CONFIG, PropagationConfig, global_metrics
from .local_metrics import count_params

X_METRICS = ("log2_gwc", "log2_gcc", "gsc")
Y_METRICS = ("top1", "top5")
COMPARE_HEADER = ("model", "gcip", "log2_gcc", "gsc", "log2_gwc", "params")


class FitError(ValueError):
    pass


@dataclass(frozen=True)
class FitResult:
    """``y = a * x**b`` fitted by least squares on ``(ln x, ln y)``.

    ``ln_a`` is kept alongside ``a`` because ``a`` underflows when x spans
    hundreds of orders of magnitude.
    """

    ln_a: float
    b: float
    r2: float
    n_points: int
    x_metric: str = "x"
    y_metric: str = "y"

    @property
    def a(self) -> float:
        return math.exp(self.ln_a)

    def predict(self, x):
        return self.a * np.power(x, self.b)

    def to_dict(self) -> dict:
        return {
            "a": self.a,
            "ln_a": self.ln_a,
            "b": self.b,
            "r2": self.r2,
            "n_points": self.n_points,
            "x_metric": self.x_metric,
            "y_metric": self.y_metric,
        }


def fit_loglog(ln_x: Sequence[float], ln_y: Sequence[float], x_metric="x", y_metric="y") -> FitResult:
    """Closed-form simple regression of ``ln_y`` on ``ln_x``."""
    lx = np.asarray(ln_x, dtype=float)
    ly = np.asarray(ln_y, dtype=float)
    if lx.shape != ly.shape or lx.ndim != 1:
        raise FitError("x and y must be 1-D and of equal length")
    n = lx.size
    if n < 3:
        raise FitError(f"need at least 3 points, got {n}")
    if not (np.all(np.isfinite(lx)) and np.all(np.isfinite(ly))):
        raise FitError("non-finite coordinate")
    mx, my = lx.mean(), ly.mean()
    sxx = np.sum((lx - mx) ** 2)
    if sxx <= 1e-300 or sxx <= 1e-24 * n * max(1.0, mx * mx):
        raise FitError("degenerate x variance")
    b = np.sum((lx - mx) * (ly - my)) / sxx
    ln_a = my - b * mx
    ss_res = np.sum((ly - (ln_a + b * lx)) ** 2)
    ss_tot = np.sum((ly - my) ** 2)
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    r2 = min(1.0, max(0.0, r2))
    return FitResult(float(ln_a), float(b), float(r2), n, x_metric, y_metric)


def fit_power_law(x: Sequence[float], y: Sequence[float], x_metric="x", y_metric="y") -> FitResult:
    xs = np.asarray(x, dtype=float)
    ys = np.asarray(y, dtype=float)
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise FitError("power-law fit needs strictly positive coordinates")
    return fit_loglog(np.log(xs), np.log(ys), x_metric, y_metric)


def x_log_value(metrics, x_metric: str) -> float:
    """Natural log of the chosen complexity metric, computed without leaving log space."""
    if x_metric == "log2_gwc":
        return metrics.log2_gwc * math.log(2.0)
    if x_metric == "log2_gcc":
        return metrics.log2_gcc * math.log(2.0)
    if x_metric == "gsc":
        return math.log(metrics.gsc) if metrics.gsc > 0 else -math.inf
    raise ValueError(f"x_metric must be one of {X_METRICS}")


@dataclass(frozen=True)
class ManifestFit:
    fit: FitResult
    spearman: float
    points: list  # (record name, source, zoo key, ln x, y)


def fit_manifest(x_metric: str = "log2_gwc", y_metric: str = "top1",
                 config: PropagationConfig = DEFAULT_CONFIG, sources=("table1",)) -> ManifestFit:
    """Fit accuracy against complexity over manifest rows with a zoo builder."""
    from .model_zoo import build, built_family_records

    if y_metric not in Y_METRICS:
        raise ValueError(f"y_metric must be one of {Y_METRICS}")
    cache = {}
    points = []
    for rec, key in built_family_records(y_metric):
        if rec.source not in sources:
            continue
        if key not in cache:
            cache[key] = global_metrics(build(key), config)
        points.append((rec.name, rec.source, key, x_log_value(cache[key], x_metric), getattr(rec, y_metric)))
    ln_x = [p[3] for p in points]
    y = [p[4] for p in points]
    fit = fit_loglog(ln_x, np.log(y), x_metric, y_metric)
    rho = stats.spearmanr(ln_x, y).statistic
    return ManifestFit(fit, float(rho), points)


def vc_bound(weights: int, layers: int) -> float:
    """``W * L * log2(W)``: the nearly tight VC bound for piecewise-linear nets, unit constant."""
    if weights < 2:
        raise ValueError("weights must be at least 2")
    if layers < 1:
        raise ValueError("layers must be at least 1")
    return weights * layers * math.log2(weights)


def weight_layers(graph: NetworkGraph) -> int:
    return sum(1 for n in graph.nodes if n.kind in ("dense", "conv2d", "conv_transpose2d"))


def graph_vc_bound(graph: NetworkGraph) -> float:
    return vc_bound(count_params(graph), weight_layers(graph))


def compare_rows(names: Iterable[str], config: PropagationConfig = DEFAULT_CONFIG, constants=None) -> list[tuple]:
    from .model_zoo import build

    rows = []
    for name in names:
        m = global_metrics(build(name), config, constants)
        rows.append((name, m.gcip, m.log2_gcc, m.gsc, m.log2_gwc, m.params))
    return rows


def format_value(v) -> str:
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def write_csv(rows: Iterable[Sequence], header: Sequence[str], stream) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        if len(row) != len(header):
            raise ValueError(f"row has {len(row)} fields, header has {len(header)}")
        writer.writerow([format_value(v) for v in row])


def export_csv(rows: Iterable[Sequence], header: Sequence[str], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        write_csv(rows, header, fh)
