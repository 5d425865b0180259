"""Monte-Carlo estimates of local intrinsic power.

Reproduces the data-driven constants for activations (ratio of output to
input spread under random input) and the box-filter experiment that checks
the convolution power formula.  Closed-form/quadrature oracles are provided
for the activation estimates.

Seeding is splittable: replicate ``r`` draws from
``numpy.random.default_rng([seed, r])``, so every replicate is reproducible
on its own and the result does not depend on evaluation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special, stats

from . import _kernels

DISTRIBUTIONS = ("standard_normal", "uniform_sym")
STATISTICS = ("std_ratio", "var_ratio")
ELEMENTWISE_FNS = tuple(_kernels.FN_CODES)

_SQRT3 = math.sqrt(3.0)


@dataclass(frozen=True)
class EstimateResult:
    estimate: float
    std_error: float
    n_samples: int
    distribution: str
    statistic: str

    def to_dict(self) -> dict:
        return {
            "estimate": self.estimate,
            "std_error": self.std_error,
            "n_samples": self.n_samples,
            "distribution": self.distribution,
            "statistic": self.statistic,
        }


@dataclass(frozen=True)
class BoxFilterCurve:
    k: np.ndarray
    var_ratio: np.ndarray
    p_formula: np.ndarray
    output_var: np.ndarray  # mean output variance over vectors (unnormalised)
    first_input_var: float

    def rows(self) -> list[tuple[int, float, float]]:
        return [(int(k), float(v), float(p)) for k, v, p in zip(self.k, self.var_ratio, self.p_formula)]


def _rng(seed: int, replicate: int) -> np.random.Generator:
    return np.random.default_rng([seed, replicate])


def draw(rng: np.random.Generator, distribution: str, size) -> np.ndarray:
    """Unit-variance, zero-mean samples."""
    if distribution == "standard_normal":
        return rng.standard_normal(size)
    if distribution == "uniform_sym":
        return rng.uniform(-_SQRT3, _SQRT3, size)
    raise ValueError(f"distribution must be one of {DISTRIBUTIONS}, got {distribution!r}")


def _ratio(var_in, var_out, statistic):
    if statistic == "var_ratio":
        return var_out / var_in
    if statistic == "std_ratio":
        return math.sqrt(var_out / var_in)
    raise ValueError(f"statistic must be one of {STATISTICS}, got {statistic!r}")


def _combine(moments: np.ndarray, counts: np.ndarray) -> tuple[float, float]:
    """Pooled variances (in, out) from per-replicate moments, in replicate order."""
    n = 0
    mean_x = m2_x = mean_y = m2_y = 0.0
    for (mx, sx, my, sy), nb in zip(moments, counts):
        tot = n + nb
        dx = mx - mean_x
        dy = my - mean_y
        m2_x += sx + dx * dx * n * nb / tot
        m2_y += sy + dy * dy * n * nb / tot
        mean_x += dx * nb / tot
        mean_y += dy * nb / tot
        n = tot
    return m2_x / n, m2_y / n


def _replicate_sizes(n_samples: int, n_replicates: int) -> list[int]:
    bounds = [n_samples * r // n_replicates for r in range(n_replicates + 1)]
    return [b - a for a, b in zip(bounds, bounds[1:])]


def estimate_activation_power(fn: str, distribution: str = "standard_normal", statistic: str = "std_ratio",
                              n_samples: int = 1_000_000, seed: int = 0, n_replicates: int = 32) -> EstimateResult:
    """Ratio of output to input spread of ``fn`` applied to i.i.d. samples.

    ``std_error`` is the batch-means error over ``n_replicates`` replicates.
    """
    if fn not in _kernels.FN_CODES:
        raise ValueError(f"fn must be one of {ELEMENTWISE_FNS}, got {fn!r}")
    if statistic not in STATISTICS:
        raise ValueError(f"statistic must be one of {STATISTICS}, got {statistic!r}")
    if n_samples < 1000:
        raise ValueError("n_samples must be at least 1000")
    if not 2 <= n_replicates <= n_samples // 2:
        raise ValueError("n_replicates must be in [2, n_samples / 2]")
    code = _kernels.FN_CODES[fn]
    sizes = _replicate_sizes(n_samples, n_replicates)
    moments = np.empty((n_replicates, 4))
    for r, size in enumerate(sizes):
        x = draw(_rng(seed, r), distribution, size)
        moments[r] = _kernels.activation_moments(x, code)
    counts = np.asarray(sizes)
    var_in, var_out = _combine(moments, counts)
    if var_in == 0.0:
        raise ValueError("degenerate sample: zero input variance")
    est = _ratio(var_in, var_out, statistic)
    per_rep = np.array([_ratio(m[1] / c, m[3] / c, statistic) for m, c in zip(moments, counts)])
    se = float(np.std(per_rep, ddof=1) / math.sqrt(n_replicates))
    return EstimateResult(est, se, n_samples, distribution, statistic)


def activation_power_oracle(fn: str, statistic: str = "std_ratio", distribution: str = "standard_normal") -> float:
    """Exact output/input spread ratio for unit-variance input.

    ReLU under a standard normal uses the half-normal moments; everything
    else is integrated numerically against the input density.
    """
    if statistic not in STATISTICS:
        raise ValueError(f"statistic must be one of {STATISTICS}, got {statistic!r}")
    if fn not in ("relu", "tanh", "sigmoid", "linear"):
        raise ValueError(f"no oracle for {fn!r}")
    if fn == "linear":
        return 1.0
    if fn == "relu" and distribution == "standard_normal":
        var = 0.5 - 1.0 / (2.0 * math.pi)
    else:
        f = {"relu": lambda v: max(v, 0.0), "tanh": math.tanh,
             "sigmoid": special.expit}[fn]
        if distribution == "standard_normal":
            pdf, lo, hi = stats.norm.pdf, -np.inf, np.inf
        elif distribution == "uniform_sym":
            pdf, lo, hi = (lambda v: 1.0 / (2.0 * _SQRT3)), -_SQRT3, _SQRT3
        else:
            raise ValueError(f"distribution must be one of {DISTRIBUTIONS}")
        opts = dict(epsabs=1e-10, epsrel=1e-10, limit=200)
        m1 = integrate.quad(lambda v: f(v) * pdf(v), lo, hi, **opts)[0]
        m2 = integrate.quad(lambda v: f(v) ** 2 * pdf(v), lo, hi, **opts)[0]
        var = m2 - m1 * m1
    return _ratio(1.0, var, statistic)


def activation_variance_sweep(fn: str, input_vars, distribution: str = "standard_normal",
                              n_samples: int = 100_000, seed: int = 0) -> list[tuple[float, float]]:
    """(input variance, output variance) pairs for a range of input scales."""
    if fn not in _kernels.FN_CODES:
        raise ValueError(f"fn must be one of {ELEMENTWISE_FNS}, got {fn!r}")
    code = _kernels.FN_CODES[fn]
    rows = []
    for i, v in enumerate(input_vars):
        if v <= 0:
            raise ValueError("input variances must be positive")
        x = math.sqrt(v) * draw(_rng(seed, i), distribution, n_samples)
        m = _kernels.activation_moments(x, code)
        rows.append((float(m[1] / n_samples), float(m[3] / n_samples)))
    return rows


def boxfilter_experiment(vector_len: int = 15000, n_vectors: int = 100, k_max: int = 500,
                         seed: int = 0) -> BoxFilterCurve:
    """Variance reduction of a constant 1/K filter on standard-normal vectors.

    ``var_ratio`` averages ``var(output) / var(input)`` over the vectors and is
    compared against ``p_formula = S_o / (K * S_i)``.
    """
    if not vector_len >= k_max >= 1:
        raise ValueError("need vector_len >= k_max >= 1")
    if n_vectors < 1:
        raise ValueError("n_vectors must be positive")
    x = np.empty((n_vectors, vector_len))
    for v in range(n_vectors):
        x[v] = _rng(seed, v).standard_normal(vector_len)
    out_var = _kernels.boxfilter_variances(x, k_max)
    in_var = x.var(axis=1)
    k = np.arange(1, k_max + 1)
    s_out = vector_len - k + 1
    return BoxFilterCurve(
        k=k,
        var_ratio=(out_var / in_var[:, None]).mean(axis=0),
        p_formula=s_out / (k * vector_len),
        output_var=out_var.mean(axis=0),
        first_input_var=float(in_var[0]),
    )


def softmax(x: np.ndarray) -> np.ndarray:
    z = np.exp(x - x.max(axis=-1, keepdims=True))
    return z / z.sum(axis=-1, keepdims=True)


def softmax_power_estimate(vector_len: int, n_trials: int = 100, seed: int = 0) -> EstimateResult:
    """Std ratio of softmax outputs to inputs, pooled over ``n_trials`` vectors."""
    if vector_len < 2:
        raise ValueError("vector_len must be at least 2")
    if n_trials < 2:
        raise ValueError("n_trials must be at least 2")
    x = np.empty((n_trials, vector_len))
    for r in range(n_trials):
        x[r] = _rng(seed, r).standard_normal(vector_len)
    y = softmax(x)
    est = float(np.std(y) / np.std(x))
    per_trial = y.std(axis=1) / x.std(axis=1)
    se = float(np.std(per_trial, ddof=1) / math.sqrt(n_trials))
    return EstimateResult(est, se, n_trials * vector_len, "standard_normal", "std_ratio")


def softmax_power_delta(vector_len: int) -> float:
    """Large-n approximation sqrt(e - 1) / n of the softmax std ratio."""
    return math.sqrt(math.e - 1.0) / vector_len
