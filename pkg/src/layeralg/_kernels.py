"""Hot numeric loops for the estimators.

Each kernel has a numba version and a pure-numpy version with the same
signature.  The numba path is used when numba imports and the environment
variable ``LAYERALG_DISABLE_NUMBA`` is unset (or ``0``).  Results of the two
paths agree to rounding, not bit for bit.

Only the box filter runs faster under numba (about 1.8x on one core); the
activation moments are a handful of vectorised ufunc passes that numpy
already does at memory speed, so they use the numpy kernel on both
backends.  ``benchmarks/bench_kernels.py`` times both.
"""

import os

import numpy as np

FN_CODES = {
    "linear": 0,
    "relu": 1,
    "tanh": 2,
    "sigmoid": 3,
    "elu": 4,
    "leaky_relu": 5,
    "swish": 6,
}

LEAKY_SLOPE = 0.01


def _env_disabled():
    return os.environ.get("LAYERALG_DISABLE_NUMBA", "0").strip().lower() not in ("", "0", "false", "no")


try:
    if _env_disabled():
        raise ImportError("disabled by LAYERALG_DISABLE_NUMBA")
    import numba
except ImportError:
    numba = None

HAVE_NUMBA = numba is not None
BACKEND = "numba" if HAVE_NUMBA else "numpy"


# --- numpy reference path ---------------------------------------------------


def apply_activation_np(x, code):
    if code == 0:
        return x.copy()
    if code == 1:
        return np.maximum(x, 0.0)
    if code == 2:
        return np.tanh(x)
    if code == 3:
        return 1.0 / (1.0 + np.exp(-x))
    if code == 4:
        return np.where(x > 0.0, x, np.expm1(np.minimum(x, 0.0)))
    if code == 5:
        return np.where(x > 0.0, x, LEAKY_SLOPE * x)
    if code == 6:
        return x / (1.0 + np.exp(-x))
    raise ValueError(f"unknown activation code {code}")


def activation_moments_np(x, code):
    """(mean_in, m2_in, mean_out, m2_out) where m2 is the sum of squared deviations."""
    y = apply_activation_np(x, code)
    mx = x.mean()
    my = y.mean()
    return np.array([mx, np.sum((x - mx) ** 2), my, np.sum((y - my) ** 2)])


def boxfilter_variances_np(x, k_max):
    """Population variance of the valid moving average of each row, K = 1..k_max."""
    n_vec, n = x.shape
    csum = np.zeros((n_vec, n + 1))
    np.cumsum(x, axis=1, out=csum[:, 1:])
    out = np.empty((n_vec, k_max))
    for k in range(1, k_max + 1):
        window_sums = csum[:, k:] - csum[:, :-k]
        out[:, k - 1] = window_sums.var(axis=1) / (k * k)
    return out


# --- numba path -------------------------------------------------------------

if HAVE_NUMBA:

    @numba.njit(cache=False)
    def _act_scalar(v, code):
        if code == 0:
            return v
        if code == 1:
            return v if v > 0.0 else 0.0
        if code == 2:
            return np.tanh(v)
        if code == 3:
            return 1.0 / (1.0 + np.exp(-v))
        if code == 4:
            return v if v > 0.0 else np.expm1(v)
        if code == 5:
            return v if v > 0.0 else LEAKY_SLOPE * v
        return v / (1.0 + np.exp(-v))

    @numba.njit(cache=False)
    def activation_moments_nb(x, code):
        n = x.shape[0]
        y = np.empty(n)
        sx = 0.0
        sy = 0.0
        for i in range(n):
            yi = _act_scalar(x[i], code)
            y[i] = yi
            sx += x[i]
            sy += yi
        mx = sx / n
        my = sy / n
        m2x = 0.0
        m2y = 0.0
        for i in range(n):
            dx = x[i] - mx
            dy = y[i] - my
            m2x += dx * dx
            m2y += dy * dy
        out = np.empty(4)
        out[0] = mx
        out[1] = m2x
        out[2] = my
        out[3] = m2y
        return out

    @numba.njit(cache=False)
    def boxfilter_variances_nb(x, k_max):
        n_vec, n = x.shape
        out = np.empty((n_vec, k_max))
        csum = np.empty(n + 1)
        for v in range(n_vec):
            csum[0] = 0.0
            for i in range(n):
                csum[i + 1] = csum[i] + x[v, i]
            for k in range(1, k_max + 1):
                m = n - k + 1
                s = 0.0
                for i in range(m):
                    s += csum[i + k] - csum[i]
                mean = s / m
                acc = 0.0
                for i in range(m):
                    d = csum[i + k] - csum[i] - mean
                    acc += d * d
                out[v, k - 1] = acc / m / (k * k)
        return out

    boxfilter_variances = boxfilter_variances_nb
else:
    activation_moments_nb = None
    boxfilter_variances_nb = None
    boxfilter_variances = boxfilter_variances_np

activation_moments = activation_moments_np
