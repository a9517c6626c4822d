"""Compare the compiled and numpy kernel backends.

Times the generic row-pass kernels on dense designs, the product-term
kernels on the TSLS designs, the structural-equation kernel and one full
Monte Carlo cell, and checks that both backends agree.

    python benchmarks/bench_kernels.py --n 10000 --repeat 200
"""

import argparse
import time

import numpy as np

from noshlab import _kernels_py

try:
    from noshlab import _kernels as _kernels_c
except ImportError:  # extension not built
    _kernels_c = None


def _best(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_kernels(n, repeat, seed):
    rng = np.random.default_rng(seed)
    rows = []
    for k in (2, 4, 6, 8):
        W = np.ascontiguousarray(rng.standard_normal((n, k)))
        R = np.ascontiguousarray(W + 0.5 * rng.standard_normal((n, k)))
        y = rng.standard_normal(n)
        b = rng.standard_normal(k)
        for name, mod in (("numpy", _kernels_py), ("cython", _kernels_c)):
            if mod is None:
                continue
            t_cm = _best(lambda: mod.cross_moments(W, R, y), repeat)
            t_rm = _best(lambda: mod.residual_meat(W, R, y, b), repeat)
            rows.append((k, name, t_cm * 1e6, t_rm * 1e6))
        if _kernels_c is not None:
            a = _kernels_py.cross_moments(W, R, y)
            c = _kernels_c.cross_moments(W, R, y)
            np.testing.assert_allclose(a[0], c[0], rtol=1e-10)
            np.testing.assert_allclose(a[1], c[1], rtol=1e-10, atol=1e-9)
            a = _kernels_py.residual_meat(W, R, y, b)
            c = _kernels_c.residual_meat(W, R, y, b)
            np.testing.assert_allclose(a[1], c[1], rtol=1e-10)
    print(f"row-pass kernels, n={n}, best of {repeat} (microseconds)")
    print(f"{'k':>3} {'backend':>8} {'cross_moments':>14} {'residual_meat':>14}")
    for k, name, a, b in rows:
        print(f"{k:>3} {name:>8} {a:>14.1f} {b:>14.1f}")


def bench_product(n, repeat, seed):
    from noshlab import builtin_scenario, dgp
    from noshlab.ivest import design_terms

    rng = np.random.default_rng(seed)
    base = np.ascontiguousarray(rng.standard_normal((n, 4)))
    y = rng.standard_normal(n)
    print(f"\nproduct-term TSLS kernels, n={n}, best of {repeat} (microseconds)")
    print(f"{'spec':>4} {'backend':>8} {'moments':>10} {'meat':>10}")
    for spec in ("1", "2", "3", "4"):
        r_terms, w_terms, _ = design_terms(spec)
        b = rng.standard_normal(len(r_terms))
        for name, mod in (("numpy", _kernels_py), ("cython", _kernels_c)):
            if mod is None:
                continue
            t_m = _best(lambda: mod.product_moments(base, r_terms, w_terms, y), repeat)
            t_e = _best(lambda: mod.product_meat(base, r_terms, w_terms, y, b), repeat)
            print(f"{spec:>4} {name:>8} {t_m * 1e6:>10.1f} {t_e * 1e6:>10.1f}")
        if _kernels_c is not None:
            a = _kernels_py.product_meat(base, r_terms, w_terms, y, b)
            c = _kernels_c.product_meat(base, r_terms, w_terms, y, b)
            np.testing.assert_allclose(a[1], c[1], rtol=1e-10)

    cfg = builtin_scenario(2).with_n(n)
    ez, ex, ey, bits = dgp.draw(cfg, seed)
    params = cfg.packed_params()
    print(f"\nstructural equations, n={n}, best of {repeat} (microseconds)")
    results = {}
    for name, mod in (("numpy", _kernels_py), ("cython", _kernels_c)):
        if mod is None:
            continue
        t = _best(lambda: mod.structural(ez, ex, ey, bits, params, cfg.rho_power), repeat)
        results[name] = mod.structural(ez, ex, ey, bits, params, cfg.rho_power)
        print(f"{name:>8} {t * 1e6:>10.1f}")
    if len(results) == 2:
        np.testing.assert_allclose(results["numpy"][1], results["cython"][1], rtol=1e-12, atol=1e-12)


def bench_cell(n, reps, spec):
    # Backend is fixed at import, so swap the module attributes directly.
    from noshlab import builtin_scenario, kernels
    from noshlab.mc import simulate_cell

    scen = builtin_scenario(2)
    out = {}
    for name, mod in (("numpy", _kernels_py), ("cython", _kernels_c)):
        if mod is None:
            continue
        for attr in ("cross_moments", "residual_meat", "product_moments", "product_meat", "structural"):
            setattr(kernels, attr, getattr(mod, attr))
        simulate_cell(scen, n, spec, 5, 0)  # warm-up
        t0 = time.perf_counter()
        draws = simulate_cell(scen, n, spec, reps, 0)
        out[name] = (time.perf_counter() - t0, draws)
    print(f"\nMonte Carlo cell: scenario 2, n={n}, TSLS({spec}), {reps} reps")
    for name, (t, _) in out.items():
        print(f"{name:>8}: {t:.2f} s  ({1e3 * t / reps:.2f} ms/rep)")
    if len(out) == 2:
        diff = np.max(np.abs(out["numpy"][1].points - out["cython"][1].points))
        print(f"max |point difference| between backends: {diff:.2e}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=10000)
    ap.add_argument("--repeat", type=int, default=200)
    ap.add_argument("--reps", type=int, default=200, help="replications for the cell benchmark")
    ap.add_argument("--spec", default="4")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    if _kernels_c is None:
        print("compiled extension not available; timing numpy only")
    bench_kernels(args.n, args.repeat, args.seed)
    bench_product(args.n, args.repeat, args.seed)
    bench_cell(args.n, args.reps, args.spec)


if __name__ == "__main__":
    main()
