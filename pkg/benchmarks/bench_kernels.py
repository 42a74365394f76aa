"""Compare the compiled walk kernels against the numpy reference.

Run as a script; prints a timing table and the cross-backend agreement.
The compiled module is optional, so this also documents what the pure
fallback costs.

    python benchmarks/bench_kernels.py
"""

import time

import numpy as np

from mixlab.aggregation import two_expert_weight
from mixlab.kernels import BACKEND, reference

try:
    from mixlab.kernels import _speedups
except ImportError:
    _speedups = None


def _time(fn, *args, repeat=3):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_excursion_dp():
    print("excursion_dp(n, tau, gamma)")
    for n, tau in ((2000, 26), (10000, 32)):
        gamma = np.sqrt(np.log(n) / n)
        t_ref, p_ref = _time(reference.excursion_dp, n, tau, gamma)
        line = f"  n={n:>6}  reference {t_ref * 1e3:8.2f} ms"
        if _speedups is not None:
            t_fast, p_fast = _time(_speedups.excursion_dp, n, tau, gamma)
            rel = abs(p_fast - p_ref) / max(p_ref, 1e-300)
            line += f"   compiled {t_fast * 1e3:8.2f} ms   speedup {t_ref / t_fast:5.1f}x   rel diff {rel:.2e}"
        print(line)


def bench_walk_batch():
    print("walk_batch_stats(steps, tau, ...)")
    rng = np.random.default_rng(0)
    for reps, n in ((4096, 2000), (1024, 10000)):
        steps = np.where(rng.random((reps, n + 1)) < 0.53, 1, -1).astype(np.int8)
        grid = np.arange(-n, n + 1)
        wtab = np.asarray(two_expert_weight(grid, 0.5, 0.6))
        vtab = 0.2 + 0.6 * wtab
        l1tab = (1.0 - vtab) ** 2
        l2tab = vtab**2
        tau = 26
        t_ref, out_ref = _time(reference.walk_batch_stats, steps, tau, wtab, vtab, l1tab, l2tab)
        line = f"  reps={reps:>5} n={n:>6}  reference {t_ref * 1e3:8.2f} ms"
        if _speedups is not None:
            t_fast, out_fast = _time(_speedups.walk_batch_stats, steps, tau, wtab, vtab, l1tab, l2tab)
            worst = max(
                float(np.max(np.abs(np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64))))
                for a, b in zip(out_ref, out_fast)
            )
            line += f"   compiled {t_fast * 1e3:8.2f} ms   speedup {t_ref / t_fast:5.1f}x   max abs diff {worst:.2e}"
        print(line)


if __name__ == "__main__":
    print(f"active backend: {BACKEND}")
    if _speedups is None:
        print("compiled module not importable; timing the reference only")
    bench_excursion_dp()
    bench_walk_batch()
