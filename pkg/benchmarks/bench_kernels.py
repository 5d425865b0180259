"""Compare the numba and numpy estimator kernels.

    python3 benchmarks/bench_kernels.py [--repeat 3]

Both paths are imported from the same module, so numba must be installed;
the numpy path is timed directly rather than through the env flag.
"""

import argparse
import time

import numpy as np

from layeralg import _kernels


def best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if not _kernels.HAVE_NUMBA:
        raise SystemExit("numba unavailable (or LAYERALG_DISABLE_NUMBA set); nothing to compare")

    rng = np.random.default_rng(0)
    boxes = rng.standard_normal((100, 15000))
    samples = rng.standard_normal(1_000_000)

    # compile outside the timed region
    _kernels.boxfilter_variances_nb(boxes[:2, :50], 5)
    _kernels.activation_moments_nb(samples[:10], 1)

    cases = [
        ("boxfilter 100x15000, K<=500",
         lambda: _kernels.boxfilter_variances_np(boxes, 500),
         lambda: _kernels.boxfilter_variances_nb(boxes, 500)),
    ]
    for name, code in (("relu", 1), ("tanh", 2), ("sigmoid", 3)):
        cases.append((f"moments {name} n=1e6",
                      lambda c=code: _kernels.activation_moments_np(samples, c),
                      lambda c=code: _kernels.activation_moments_nb(samples, c)))

    print(f"{'case':<30}{'numpy s':>10}{'numba s':>10}{'speedup':>9}{'max rel diff':>14}")
    for name, f_np, f_nb in cases:
        t_np, r_np = best_of(f_np, args.repeat)
        t_nb, r_nb = best_of(f_nb, args.repeat)
        diff = np.max(np.abs(r_np - r_nb) / np.maximum(np.abs(r_np), 1e-300))
        print(f"{name:<30}{t_np:>10.3f}{t_nb:>10.3f}{t_np / t_nb:>9.2f}{diff:>14.2e}")


if __name__ == "__main__":
    main()
