"""Acceptance suite.

Each check prints one ``PASS``/``FAIL`` line at the agreed tolerance; the
lines are repeated in the pytest terminal summary.  Run directly with
``python3 tests/test_acceptance.py`` for the lines alone.
"""

import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest
from scipy import stats

sys.path.insert(0, str(Path(__file__).parent))

from layeralg.analysis import fit_manifest, fit_power_law, graph_vc_bound  # noqa: E402
from layeralg.estimators import activation_power_oracle, boxfilter_experiment, estimate_activation_power  # noqa: E402
from layeralg.layer_algebra import PropagationConfig, analyze, global_metrics  # noqa: E402
from layeralg.local_metrics import DEFAULT_ACTIVATION_CONSTANTS, count_params  # noqa: E402
from layeralg.model_zoo import RESNET_DEPTHS, build, build_autoencoder, build_mlp, build_plainnet, build_resnet  # noqa: E402

from randgraphs import duplicate_branch, insert_shortcut, random_chain, random_dag, shortcut_candidates  # noqa: E402

RESULTS: list[str] = []


def report(label: str, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'}  {label}: {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


# 1 -------------------------------------------------------------------------------------

def test_c01_activation_constants():
    t0 = time.perf_counter()
    parts, ok = [], True
    for fn, published in (("relu", 0.584), ("tanh", 0.628), ("sigmoid", 0.208)):
        r = estimate_activation_power(fn, "standard_normal", "std_ratio", n_samples=1_000_000, seed=7)
        oracle = activation_power_oracle(fn)
        z = (r.estimate - oracle) / r.std_error
        ok &= abs(r.estimate - published) <= 0.01 and abs(z) <= 4
        parts.append(f"{fn} {r.estimate:.5f} (constant {published}, oracle {oracle:.5f}, z {z:+.2f})")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 10
    report("C1 activation constants", ok, "; ".join(parts) + f"; {elapsed:.2f} s")


# 2 -------------------------------------------------------------------------------------

def test_c02_inverse_relation():
    worst = max((abs(m.p_local * m.c_local - 1), fn) for fn, m in DEFAULT_ACTIVATION_CONSTANTS.items()
                if not m.neutral)
    sm = DEFAULT_ACTIVATION_CONSTANTS["softmax"]
    report("C2 inverse relation", worst[0] <= 1e-2,
           f"max |p*c-1| = {worst[0]:.2e} ({worst[1]}); softmax p*c = {sm.p_local * sm.c_local:.5f}")


# 3 -------------------------------------------------------------------------------------

TABLE1 = {
    "resnet18": 11_689_512, "resnet34": 21_797_672, "resnet50": 25_557_032,
    "resnet101": 44_549_160, "resnet152": 60_192_808,
    "vgg11": 132_863_336, "vgg13": 133_047_848, "vgg16": 138_357_544, "vgg19": 143_667_240,
}


def test_c03_param_counts():
    got = {name: count_params(build(name)) for name in TABLE1}
    bad = {k: v for k, v in got.items() if v != TABLE1[k]}
    report("C3 parameter counts", not bad, f"{len(TABLE1) - len(bad)}/{len(TABLE1)} exact" +
           (f", mismatches {bad}" if bad else ""))


# 4 -------------------------------------------------------------------------------------

def test_c04_autoencoder():
    m = global_metrics(build_autoencoder([64, 32, 16, 8, 16, 32, 64]))
    ok = abs(m.gcip - 1.0) <= 1e-9 and m.log2_gcc > 0  # log2 GCC > 0 means GCC > 1
    report("C4 linear autoencoder", ok, f"GCIP = {m.gcip!r}, log2 GCC = {m.log2_gcc:.4f}")


# 5 -------------------------------------------------------------------------------------

def test_c05_boxfilter():
    t0 = time.perf_counter()
    c = boxfilter_experiment(15000, 100, 500, seed=0)
    elapsed = time.perf_counter() - t0
    k = c.k[1:100]
    dev = np.abs(c.var_ratio[1:100] - 1 / k) * k
    worst = int(k[np.argmax(dev)])
    report("C5 box filter", dev.max() < 0.05 and elapsed < 60,
           f"max rel dev {dev.max():.4f} at K={worst} over 2..100; {elapsed:.2f} s")


# 6 -------------------------------------------------------------------------------------

@pytest.fixture(scope="module")
def families():
    res = {d: global_metrics(build_resnet(d)) for d in RESNET_DEPTHS}
    plain = {d: global_metrics(build_plainnet(d)) for d in RESNET_DEPTHS}
    return res, plain


def _strict(seq, decreasing=False):
    pairs = list(zip(seq, seq[1:]))
    return all((b < a) if decreasing else (b > a) for a, b in pairs)


def test_c06a_resnet_above_plainnet(families):
    res, plain = families
    bad = [d for d in RESNET_DEPTHS if not res[d].gcip > plain[d].gcip]
    report("C6a GCIP(ResNet-n) > GCIP(PlainNet-n)", not bad,
           ", ".join(f"{d}: {res[d].gcip:.3g} vs {plain[d].gcip:.3g}" for d in RESNET_DEPTHS))


def test_c06b_gcip_decreasing(families):
    res, plain = families
    lines = []
    ok = True
    for name, fam in (("ResNet", res), ("PlainNet", plain)):
        seq = [fam[d].gcip for d in RESNET_DEPTHS]
        good = _strict(seq, decreasing=True)
        ok &= good
        lines.append(f"{name} {' > '.join(f'{v:.4g}' for v in seq)}" + ("" if good else " (not strict)"))
    report("C6b GCIP strictly decreasing with depth", ok, "; ".join(lines))


def test_c06c_complexity_increasing(families):
    res, plain = families
    ok = True
    parts = []
    for name, fam in (("ResNet", res), ("PlainNet", plain)):
        for metric in ("log2_gcc", "gsc"):
            seq = [getattr(fam[d], metric) for d in RESNET_DEPTHS]
            good = _strict(seq)
            ok &= good
            parts.append(f"{name} {metric} {'ok' if good else 'NOT increasing'}")
    report("C6c gcc_log2 and gsc strictly increasing", ok, ", ".join(parts))


def test_c06d_gcc_gap(families):
    res, plain = families
    gaps = {d: abs(res[d].log2_gcc - plain[d].log2_gcc) / res[d].log2_gcc for d in RESNET_DEPTHS}
    report("C6d ResNet/PlainNet gcc_log2 gap < 5%", max(gaps.values()) < 0.05,
           f"max gap {max(gaps.values()):.2e}")


# 7 -------------------------------------------------------------------------------------

def test_c07_chain_laws():
    rng = np.random.default_rng(2024)
    additive = PropagationConfig(complexity_mode="additive")
    worst_rel, exact = 0.0, 0
    for i in range(100):
        g = random_chain(rng, name=f"chain{i}")
        a = analyze(g)
        expected = math.exp(math.fsum(math.log(m.p_local) for m in a.local.values()))
        worst_rel = max(worst_rel, abs(a.metrics.gcip - expected) / expected)
        b = analyze(g, additive)
        exact += b.complexity[g.sink] == b.metrics.gsc
    report("C7 chain laws", worst_rel <= 1e-12 and exact == 100,
           f"100 chains: max rel |GCIP - prod p| {worst_rel:.2e}; additive GCC == GSC in {exact}/100")


# 8 -------------------------------------------------------------------------------------

def test_c08_merge_laws():
    rng = np.random.default_rng(4096)
    dup_exact = 0
    for i in range(100):
        g = random_chain(rng, name=f"c{i}")
        ids = [n.id for n in g.nodes][1:]
        s = int(rng.integers(len(ids)))
        e = int(rng.integers(s, len(ids)))
        dup_exact += global_metrics(duplicate_branch(g, ids[s], ids[e])).gcip == global_metrics(g).gcip
    monotone, tried = 0, 0
    while tried < 100:
        g = random_dag(rng, name=f"d{tried}")
        pairs = shortcut_candidates(g)
        if not pairs:
            continue
        a, b = pairs[int(rng.integers(len(pairs)))]
        g2 = insert_shortcut(g, a, b)
        m1, m2 = global_metrics(g), global_metrics(g2)
        monotone += m2.gcip >= m1.gcip and m2.log2_gcc >= m1.log2_gcc
        tried += 1
    report("C8 merge laws", dup_exact == 100 and monotone == 100,
           f"duplicated-branch GCIP exact {dup_exact}/100; shortcut never decreases {monotone}/100")


# 9 -------------------------------------------------------------------------------------

def test_c09_fit():
    x = np.geomspace(1e-3, 1e6, 40)
    worst = 0.0
    ok = True
    for a, b in ((2.0, 0.5), (0.37, -1.25), (150.0, 0.0071)):
        r = fit_power_law(x, a * x ** b)
        worst = max(worst, abs(r.a - a) / a, abs(r.b - b) / abs(b))
        ok &= r.r2 >= 1 - 1e-9
    mf = fit_manifest("log2_gwc", "top1")
    rho = stats.spearmanr([p[3] for p in mf.points], [p[4] for p in mf.points]).statistic
    ok &= worst <= 1e-9 and mf.fit.n_points >= 9 and mf.fit.b > 0 and rho > 0
    report("C9 power-law fit", ok,
           f"synthetic max rel err {worst:.1e}; manifest n={mf.fit.n_points}, b={mf.fit.b:.3e}, "
           f"R2={mf.fit.r2:.3f}, Spearman={rho:.3f}")


# 10 ------------------------------------------------------------------------------------

def test_c10_vc_ratio():
    ok = True
    parts = []
    for n_layers in range(2, 6):
        ratios = []
        for e in range(4, 11):
            g = build_mlp([784] + [2 ** e] * (n_layers - 1) + [10])
            ratios.append(graph_vc_bound(g) / global_metrics(g).log2_gcc)
        good = _strict(ratios)
        ok &= good
        parts.append(f"{n_layers} layers {ratios[0]:.3g}->{ratios[-1]:.3g}")
    report("C10 VC bound / gcc_log2 increasing in width", ok, "; ".join(parts))


# 11 ------------------------------------------------------------------------------------

CLI_CASES = [
    ("zoo", "build", "resnet50"),
    ("compare", "resnet18", "resnet34", "plainnet18", "vgg16", "autoencoder", "--format", "csv"),
    ("compare", "mlp", "--format", "json", "--complexity-mode", "additive", "--power-merge", "sum"),
    ("estimate", "activation", "--fn", "tanh", "--seed", "9", "--n", "100000"),
    ("estimate", "activation", "--fn", "relu", "--sweep", "0.25,1,4", "--n", "10000", "--format", "csv"),
    ("estimate", "boxfilter", "--len", "2000", "--vectors", "4", "--kmax", "60", "--seed", "5"),
    ("estimate", "softmax", "--len", "800", "--seed", "1"),
    ("fit", "--sources", "table1", "table2"),
    ("vc", "--sweep", "--format", "csv"),
    ("vc", "--mlp", "784,128,10"),
]


def test_c11_cli_determinism(tmp_path):
    def run(args):
        return subprocess.run([sys.executable, "-m", "layeralg", *args], capture_output=True)

    graph = tmp_path / "g.json"
    run(("zoo", "build", "resnet18", "--out", str(graph)))
    cases = CLI_CASES + [("analyze", str(graph), "--out", str(tmp_path / "curve.csv"))]
    same = 0
    for args in cases:
        a = run(args)
        curve_a = (tmp_path / "curve.csv").read_bytes() if args[0] == "analyze" else b""
        b = run(args)
        curve_b = (tmp_path / "curve.csv").read_bytes() if args[0] == "analyze" else b""
        same += a.returncode == 0 and a.stdout == b.stdout and curve_a == curve_b and bool(a.stdout)
    report("C11 CLI determinism", same == len(cases), f"{same}/{len(cases)} invocations byte-identical")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
