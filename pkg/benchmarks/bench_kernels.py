"""Time the compiled kernels against the pure-Python/NumPy fallback.

Runs each hot kernel on representative inputs under both backends,
checks that the two agree, and prints a small table of per-call timing
with the speedup. Usage:

    python3 benchmarks/bench_kernels.py [--repeats 2000]
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from outliersim.kernels import available_backends, load_backend


def _time(fn, args, repeats: int) -> float:
    best = float("inf")
    for _ in range(5):
        t0 = time.perf_counter()
        for _ in range(repeats):
            fn(*args)
        best = min(best, (time.perf_counter() - t0) / repeats)
    return best


def _cases(rng):
    x20 = rng.standard_normal(20)
    x200 = rng.standard_normal(200)
    a = rng.standard_normal(20)
    b = rng.standard_normal(20)
    pool = np.concatenate([a, b])
    u = rng.random((600, 20))
    t_grid = np.ascontiguousarray(np.linspace(-5.0, 5.0, 512))
    return [
        ("sigma_mask n=20", "sigma_mask", (x20, 2.0, 1)),
        ("sigma_mask n=200", "sigma_mask", (x200, 2.0, 1)),
        ("iqr_mask n=20", "iqr_mask", (x20,)),
        ("mad_mask n=20", "mad_mask", (x20, 2.24)),
        ("grubbs_mask n=20", "grubbs_mask", (x20, _grubbs_crit(21))),
        ("winsorize n=200", "winsorize_values", (x200, 10)),
        ("mw_u1_ties 20v20", "mw_u1_ties", (a, b)),
        ("perm 600x40", "perm_abs_hits", (pool, 20, u)),
        ("t_p_array 512", "t_p_array", (t_grid, 38)),
    ]


def _grubbs_crit(n_max: int) -> np.ndarray:
    from outliersim.methods import grubbs_critical_table

    return grubbs_critical_table(n_max, 0.95)


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=2000)
    args = parser.parse_args()

    backends = available_backends()
    if "compiled" not in backends:
        print("compiled backend not built; run pip install -e . first")
        return 1
    py = load_backend("python")
    cy = load_backend("compiled")
    rng = np.random.default_rng(7)
    cases = _cases(rng)

    print(f"{'kernel':20s} {'python':>12s} {'compiled':>12s} {'speedup':>9s}")
    for label, name, call_args in cases:
        fn_py = getattr(py, name)
        fn_cy = getattr(cy, name)
        res_py = fn_py(*call_args)
        res_cy = fn_cy(*call_args)
        if isinstance(res_py, tuple):
            agree = all(
                np.allclose(p, c, rtol=1e-12, atol=1e-12)
                for p, c in zip(res_py, res_cy)
            )
        else:
            agree = np.allclose(res_py, res_cy, rtol=1e-12, atol=1e-12)
        if not agree:
            print(f"{label:20s} BACKENDS DISAGREE")
            return 1
        t_py = _time(fn_py, call_args, args.repeats)
        t_cy = _time(fn_cy, call_args, args.repeats)
        print(
            f"{label:20s} {t_py * 1e6:10.2f}us {t_cy * 1e6:10.2f}us "
            f"{t_py / t_cy:8.1f}x"
        )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
