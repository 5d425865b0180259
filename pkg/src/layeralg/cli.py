"""``layeralg`` command line.

Exit codes: 0 success, 2 I/O failure (or usage error), 3 invalid graph,
model name or parameter, 4 numeric or fit failure.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import sys
from pathlib import Path

from . import __version__
from .analysis import (
    COMPARE_HEADER, X_METRICS, Y_METRICS, FitError, compare_rows, fit_manifest,
    fit_power_law, graph_vc_bound, vc_bound, weight_layers, write_csv,
)
from .estimators import (
    DISTRIBUTIONS, STATISTICS, activation_variance_sweep, boxfilter_experiment,
    estimate_activation_power, softmax_power_delta, softmax_power_estimate,
)
from .graph_ir import GraphError, GraphValidationError, parse_graph, serialize_graph, validate_graph
from .layer_algebra import (
    COMPLEXITY_MODES, CURVE_HEADER, POWER_MERGES, PropagationConfig, analyze, cumulative_curves,
)
from .local_metrics import KERNEL_SPANS, count_params, load_constants
from .model_zoo import SOURCES, build, build_mlp, zoo_names

EXIT_OK, EXIT_IO, EXIT_INVALID, EXIT_NUMERIC = 0, 2, 3, 4

ACTIVATION_CHOICES = ("relu", "tanh", "sigmoid", "elu", "leaky_relu", "swish", "linear")


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _json_safe(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    return value


def _dump_json(obj) -> str:
    return json.dumps(_json_safe(obj), indent=2, allow_nan=False) + "\n"


def _csv_text(rows, header) -> str:
    buf = io.StringIO()
    write_csv(rows, header, buf)
    return buf.getvalue()


def _text_table(rows, header) -> str:
    cells = [list(header)] + [[f"{v:.6g}" if isinstance(v, float) else str(v) for v in r] for r in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(header))]
    lines = []
    for j, row in enumerate(cells):
        lines.append("  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(row, widths))))
        if j == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def _render(rows, header, fmt: str) -> str:
    if fmt == "csv":
        return _csv_text(rows, header)
    if fmt == "text":
        return _text_table(rows, header)
    return _dump_json([dict(zip(header, r)) for r in rows])


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    try:
        with open(out, "w", newline="", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot write {out}: {exc.strerror or exc}") from exc


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read {path}: {exc.strerror or exc}") from exc


def _config(args) -> PropagationConfig:
    return PropagationConfig(args.complexity_mode, args.power_merge, args.kernel_span)


def _constants(args):
    if args.constants is None:
        return None
    _read(args.constants)  # surfaces I/O problems with the right exit code
    return load_constants(args.constants)


def _parse_ints(text: str, what: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise CliError(EXIT_INVALID, f"{what} must be a comma-separated list of integers") from None


def _parse_floats(text: str, what: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise CliError(EXIT_INVALID, f"{what} must be a comma-separated list of numbers") from None


# --- commands ---------------------------------------------------------------


def cmd_analyze(args) -> int:
    graph = parse_graph(_read(args.path))
    report = validate_graph(graph)
    if not report.ok:
        raise GraphValidationError(report)
    a = analyze(graph, _config(args), _constants(args))
    metrics = a.metrics.to_dict()
    metrics = {"model": graph.name, **metrics}
    if args.format == "text":
        width = max(map(len, metrics))
        text = "".join(f"{k.ljust(width)}  {v}\n" for k, v in metrics.items())
    else:
        text = _dump_json(metrics)
    sys.stdout.write(text)
    if args.out:
        _emit(_csv_text(cumulative_curves(graph, analysis=a), CURVE_HEADER), args.out)
    return EXIT_OK


def cmd_compare(args) -> int:
    rows = compare_rows(args.models, _config(args), _constants(args))
    _emit(_render(rows, COMPARE_HEADER, args.format), args.out)
    return EXIT_OK


def cmd_zoo_list(args) -> int:
    _emit("".join(n + "\n" for n in zoo_names()), args.out)
    return EXIT_OK


def cmd_zoo_build(args) -> int:
    _emit(serialize_graph(build(args.name)), args.out)
    return EXIT_OK


def cmd_estimate_activation(args) -> int:
    if args.sweep:
        rows = activation_variance_sweep(args.fn, _parse_floats(args.sweep, "--sweep"),
                                         args.dist, args.n, args.seed)
        header = ("input_var", "output_var")
        _emit(_render(rows, header, "csv" if args.format == "text" else args.format), args.out)
        return EXIT_OK
    res = estimate_activation_power(args.fn, args.dist, args.statistic, args.n, args.seed, args.replicates)
    d = {"fn": args.fn, **res.to_dict(), "seed": args.seed}
    if args.format == "csv":
        _emit(_csv_text([tuple(d.values())], tuple(d)), args.out)
    else:
        _emit(_dump_json(d), args.out)
    return EXIT_OK


def cmd_estimate_boxfilter(args) -> int:
    curve = boxfilter_experiment(args.len, args.vectors, args.kmax, args.seed)
    fmt = "csv" if args.format == "text" else args.format
    _emit(_render(curve.rows(), ("K", "var_ratio", "p_formula"), fmt), args.out)
    return EXIT_OK


def cmd_estimate_softmax(args) -> int:
    res = softmax_power_estimate(args.len, args.trials, args.seed)
    d = {"vector_len": args.len, **res.to_dict(), "delta": softmax_power_delta(args.len), "seed": args.seed}
    if args.format == "csv":
        _emit(_csv_text([tuple(d.values())], tuple(d)), args.out)
    else:
        _emit(_dump_json(d), args.out)
    return EXIT_OK


def _read_points(path: str) -> tuple[list[float], list[float]]:
    import csv

    reader = csv.reader(io.StringIO(_read(path)))
    rows = [r for r in reader if r]
    if not rows:
        raise CliError(EXIT_INVALID, f"{path}: empty points file")
    try:
        float(rows[0][0])
    except ValueError:
        rows = rows[1:]  # header
    try:
        xs = [float(r[0]) for r in rows]
        ys = [float(r[1]) for r in rows]
    except (ValueError, IndexError):
        raise CliError(EXIT_INVALID, f"{path}: each row needs two numeric columns x,y") from None
    return xs, ys


def cmd_fit(args) -> int:
    if args.points:
        xs, ys = _read_points(args.points)
        d = fit_power_law(xs, ys).to_dict()
    else:
        mf = fit_manifest(args.x_metric, args.y_metric, _config(args), tuple(args.sources))
        d = {**mf.fit.to_dict(), "spearman": mf.spearman,
             "models": [f"{p[0]} ({p[1]})" for p in mf.points]}
    if args.format == "text":
        width = max(map(len, d))
        text = "".join(f"{k.ljust(width)}  {v}\n" for k, v in d.items() if k != "models")
    else:
        text = _dump_json(d)
    _emit(text, args.out)
    return EXIT_OK


VC_HEADER = ("layers", "width", "weights", "vc_bound", "log2_gcc", "ratio")


def _mlp_vc_row(widths: list[int], config: PropagationConfig) -> tuple:
    g = build_mlp(widths)
    a = analyze(g, config)
    vc = graph_vc_bound(g)
    return (weight_layers(g), max(widths[1:-1], default=widths[0]), count_params(g), vc,
            a.metrics.log2_gcc, vc / a.metrics.log2_gcc)


def cmd_vc(args) -> int:
    config = _config(args)
    if args.sweep:
        rows = []
        for n_layers in range(args.min_layers, args.max_layers + 1):
            for e in range(args.min_exp, args.max_exp + 1):
                w = 2 ** e
                rows.append(_mlp_vc_row([args.input] + [w] * (n_layers - 1) + [args.output], config))
        _emit(_render(rows, VC_HEADER, args.format), args.out)
        return EXIT_OK
    if args.mlp:
        row = _mlp_vc_row(_parse_ints(args.mlp, "--mlp"), config)
        d = dict(zip(VC_HEADER, row))
    else:
        if args.weights is None or args.layers is None:
            raise CliError(EXIT_INVALID, "vc needs --weights and --layers, --mlp, or --sweep")
        d = {"weights": args.weights, "layers": args.layers, "vc_bound": vc_bound(args.weights, args.layers)}
    if args.format == "csv":
        _emit(_csv_text([tuple(d.values())], tuple(d)), args.out)
    else:
        _emit(_dump_json(d), args.out)
    return EXIT_OK


# --- parser -----------------------------------------------------------------


def _add_config_flags(p):
    p.add_argument("--complexity-mode", choices=COMPLEXITY_MODES, default="multiplicative")
    p.add_argument("--power-merge", choices=POWER_MERGES, default="max")
    p.add_argument("--kernel-span", choices=KERNEL_SPANS, default="volume",
                   help="conv kernel size K counts kh*kw*c_in (volume) or kh*kw (spatial)")
    p.add_argument("--constants", metavar="FILE", help="JSON overrides for activation constants")


def _add_out(p, formats=("json", "csv", "text"), default="json"):
    p.add_argument("--out", metavar="PATH")
    p.add_argument("--format", choices=formats, default=default)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="layeralg", description="Intrinsic power and complexity of network graphs.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="global metrics of a JSON graph; cumulative curves to --out")
    p.add_argument("path")
    _add_config_flags(p)
    p.add_argument("--out", metavar="PATH", help="write the cumulative curve CSV here")
    p.add_argument("--format", choices=("json", "text"), default="json")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("compare", help="global metrics of zoo models, one row each")
    p.add_argument("models", nargs="+")
    _add_config_flags(p)
    _add_out(p, default="text")
    p.set_defaults(func=cmd_compare)

    zoo = sub.add_parser("zoo", help="built-in architectures").add_subparsers(dest="zoo_command", required=True)
    p = zoo.add_parser("list")
    p.add_argument("--out", metavar="PATH")
    p.set_defaults(func=cmd_zoo_list)
    p = zoo.add_parser("build", help="write a zoo model as JSON")
    p.add_argument("name")
    p.add_argument("--out", metavar="PATH")
    p.set_defaults(func=cmd_zoo_build)

    est = sub.add_parser("estimate", help="Monte-Carlo power estimates").add_subparsers(
        dest="estimate_command", required=True)
    p = est.add_parser("activation")
    p.add_argument("--fn", choices=ACTIVATION_CHOICES, required=True)
    p.add_argument("--dist", choices=DISTRIBUTIONS, default="standard_normal")
    p.add_argument("--statistic", choices=STATISTICS, default="std_ratio")
    p.add_argument("--n", type=int, default=1_000_000)
    p.add_argument("--replicates", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sweep", metavar="VARS", help="comma-separated input variances; emits a CSV curve")
    _add_out(p)
    p.set_defaults(func=cmd_estimate_activation)

    p = est.add_parser("boxfilter")
    p.add_argument("--len", type=int, default=15000)
    p.add_argument("--vectors", type=int, default=100)
    p.add_argument("--kmax", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    _add_out(p, default="csv")
    p.set_defaults(func=cmd_estimate_boxfilter)

    p = est.add_parser("softmax")
    p.add_argument("--len", type=int, default=1000)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    _add_out(p, formats=("json", "csv"))
    p.set_defaults(func=cmd_estimate_softmax)

    p = sub.add_parser("fit", help="power-law fit of accuracy against complexity")
    p.add_argument("--points", metavar="CSV", help="fit x,y pairs from a file instead of the manifest")
    p.add_argument("--x-metric", choices=X_METRICS, default="log2_gwc")
    p.add_argument("--y-metric", choices=Y_METRICS, default="top1")
    p.add_argument("--sources", nargs="+", choices=SOURCES, default=["table1"])
    _add_config_flags(p)
    _add_out(p, formats=("json", "text"))
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("vc", help="VC-dimension bound W*L*log2(W)")
    p.add_argument("--weights", type=int)
    p.add_argument("--layers", type=int)
    p.add_argument("--mlp", metavar="WIDTHS", help="e.g. 784,128,10")
    p.add_argument("--sweep", action="store_true", help="MLP width sweep")
    p.add_argument("--input", type=int, default=784)
    p.add_argument("--output", type=int, default=10)
    p.add_argument("--min-exp", type=int, default=4)
    p.add_argument("--max-exp", type=int, default=10)
    p.add_argument("--min-layers", type=int, default=2)
    p.add_argument("--max-layers", type=int, default=5)
    _add_config_flags(p)
    _add_out(p)
    p.set_defaults(func=cmd_vc)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except GraphValidationError as exc:
        print("error: invalid graph", file=sys.stderr)
        for v in exc.report.violations:
            print(f"  {v}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (FitError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (GraphError, KeyError, ValueError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
