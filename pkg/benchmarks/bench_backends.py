"""Time the compiled extension against the pure NumPy fallback.

Both implementations are imported directly, so one process measures both;
the package-level selection (circfit._backend.BACKEND) is reported for
reference.  Usage:

    python3 benchmarks/bench_backends.py [--repeats 5] [--quick]
"""

import argparse
import time

import numpy as np

from circfit import _kernels_np
from circfit._backend import BACKEND

try:
    from circfit import _core
except ImportError:
    _core = None


def best_of(repeats, fn, *args):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def cases(quick):
    rng = np.random.default_rng(12345)
    scale = 0.2 if quick else 1.0
    m = int(2_000_000 * scale)
    x = rng.uniform(-40, 40, m)
    z_cplx = rng.uniform(-6, 6, (int(40_000 * scale), 8)) + 1j * rng.uniform(
        -1.5, 1.5, (int(40_000 * scale), 8)
    )
    v = rng.uniform(-20, 20, int(400_000 * scale))
    nodes = rng.uniform(0, 1, 48)
    coefs = rng.standard_normal(48)
    w = np.sort(rng.uniform(-3, 3, 100))
    z = rng.standard_normal((100, 250))
    sigma, h = 0.5, 0.7
    cos_a, sin_a = np.cos(w / h), np.sin(w / h)
    p = sigma * z / h
    cosh_p, sinh_p = np.cosh(p), np.sinh(p)

    def many_targets(impl):
        for t in np.linspace(-2, 2, 40):
            impl.ce_weight_sums(w, z, sigma, h, t, 0.0, 1e-10)

    def many_targets_tabled(impl):
        for t in np.linspace(-2, 2, 40):
            impl.ce_weight_sums_tabled(
                w, z, sigma, h, t, 0.0, 1e-10, cos_a, sin_a, cosh_p, sinh_p
            )

    return (
        (f"kernel_values ({m:,} pts)", lambda impl: impl.kernel_values(x)),
        (
            f"kernel_values_complex ({z_cplx.size:,} pts)",
            lambda impl: impl.kernel_values_complex(z_cplx),
        ),
        (
            f"trig_weighted_sum ({v.size:,} x 48)",
            lambda impl: impl.trig_weighted_sum(v, nodes, coefs, 0),
        ),
        ("ce_weight_sums (40 targets, 100 x 250)", many_targets),
        ("ce_weight_sums_tabled (40 targets, 100 x 250)", many_targets_tabled),
    )


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=5, help="best-of repetitions")
    ap.add_argument("--quick", action="store_true", help="smaller inputs")
    args = ap.parse_args()

    print(f"package backend selection: {BACKEND}")
    if _core is None:
        print("compiled extension not importable; timing the fallback only")
    name_w = max(len(name) for name, _ in cases(args.quick))
    header = f"{'case':<{name_w}}  {'numpy':>10}  {'compiled':>10}  {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for name, runner in cases(args.quick):
        t_np = best_of(args.repeats, runner, _kernels_np)
        if _core is None:
            print(f"{name:<{name_w}}  {t_np*1e3:>8.2f}ms  {'-':>10}  {'-':>8}")
            continue
        t_c = best_of(args.repeats, runner, _core)
        print(
            f"{name:<{name_w}}  {t_np*1e3:>8.2f}ms  {t_c*1e3:>8.2f}ms"
            f"  {t_np / t_c:>7.2f}x"
        )


if __name__ == "__main__":
    main()
