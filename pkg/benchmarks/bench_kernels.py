"""Numba kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py [--repeat 5]

Both paths are called directly, so one process times both regardless of
SWITCHCOST_DISABLE_NUMBA. A final section times a full equilibrium solve in
two subprocesses, one per setting of the flag.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from switchcost import kernels as K
from switchcost.distributions import ValuationDistribution as D
from switchcost.market import MarketConfig
from switchcost.oracle import draw_consumers


def block_case(m=3, rows=256, order=2):
    rng = np.random.default_rng(0)
    dists = [D("truncated-normal", (0.5, 0.25)), D("trapezoidal", (4,)), D("piecewise-linear", (0.3, 1.4, 0.8))][:m]
    rcodes = np.array([d.code for d in dists], dtype=np.int64)
    width = max(d.kernel_params.size for d in dists)
    rparams = np.zeros((m, width))
    for r, d in enumerate(dists):
        rparams[r, :d.kernel_params.size] = d.kernel_params
    own = D("triangular-increasing")
    x = rng.uniform(0, 1, (rows, 21))
    alpha = rng.uniform(-0.3, 0.3, (rows, m))
    return (x, alpha, rcodes, rparams, own.code, own.kernel_params, order)


def choice_case(N=1 << 18):
    cfg = MarketConfig.symmetric(4, 0.1)
    draw = draw_consumers(cfg, N, seed=1)
    P = np.array([0.4, 0.45, 0.5, 0.35])
    return (draw.v, draw.initial_firm, P, P, 0.1, True)


def cutoff_case(N=1 << 17, m=3):
    rng = np.random.default_rng(2)
    return (rng.uniform(-0.5, 0.5, (N, m)), rng.uniform(-0.5, 0.5, (N, m)), 0.1, True)


def bench(name, fast, slow, args, repeat):
    fast(*args)  # compile
    t_fast = min(timeit.repeat(lambda: fast(*args), number=1, repeat=repeat))
    t_slow = min(timeit.repeat(lambda: slow(*args), number=1, repeat=repeat))
    print(f"{name:<22} numba {t_fast * 1e3:9.2f} ms   numpy {t_slow * 1e3:9.2f} ms   x{t_slow / t_fast:6.1f}")


SOLVE = ("import time; from switchcost.market import MarketConfig; from switchcost.solver import solve_equilibrium;"
         "solve_equilibrium(MarketConfig.symmetric(3, 0.2), max_iter=2, diagnostics=False);"
         "t = time.perf_counter(); solve_equilibrium(MarketConfig.symmetric(3, 0.1), diagnostics=False);"
         "print(time.perf_counter() - t)")


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    print("kernel                 (best of", args.repeat, "runs)")
    bench("block_integrand o=0", K.block_integrand_numba, K.block_integrand_numpy, block_case(order=0), args.repeat)
    bench("block_integrand o=2", K.block_integrand_numba, K.block_integrand_numpy, block_case(order=2), args.repeat)
    bench("choice_counts", K.choice_counts_numba, K.choice_counts_numpy, choice_case(), args.repeat)
    bench("cutoff_offsets", K.cutoff_offsets_numba, K.cutoff_offsets_numpy, cutoff_case(), args.repeat)
    print("\nend to end: symmetric 3-firm equilibrium, warm process")
    for flag in ("0", "1"):
        env = dict(os.environ, SWITCHCOST_DISABLE_NUMBA=flag)
        out = subprocess.run([sys.executable, "-c", SOLVE], env=env, capture_output=True, text=True, check=True)
        label = "numpy" if flag == "1" else "numba"
        print(f"  {label}: {float(out.stdout):.2f} s")


if __name__ == "__main__":
    main()
