"""Time the numba and numpy stepping kernels on the default grid.

    python benchmarks/bench_kernels.py --steps 20000 --repeat 3
"""
import argparse
import time

import numpy as np

from chemospread import _kernels
from chemospread.model import GridSpec, InitialData, ModelParams, sample_initial


def bench(name, grid, params, steps, repeat):
    kernel = _kernels.BACKENDS[name]
    state = sample_initial(InitialData.bump(), grid)
    args = (grid.dt, grid.h, params.a, params.b, params.chi, params.tau, params.sigma, params.c)
    # warm-up (triggers compilation for numba)
    u, v = state.u.copy(), state.v.copy()
    kernel(u, v, np.empty_like(u), np.empty_like(v), 2, *args, _kernels.new_extremes())
    best = np.inf
    for _ in range(repeat):
        u, v = state.u.copy(), state.v.copy()
        t0 = time.perf_counter()
        kernel(u, v, np.empty_like(u), np.empty_like(v), steps, *args, _kernels.new_extremes())
        best = min(best, time.perf_counter() - t0)
    return best, u


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--steps", type=int, default=20000, help="steps per timing (default 20000)")
    ap.add_argument("--repeat", type=int, default=3, help="timings per backend, best kept (default 3)")
    ap.add_argument("--M", type=int, default=400, help="grid intervals (default 400)")
    ap.add_argument("--chi", type=float, default=1.0)
    ap.add_argument("--c", type=float, default=2.01)
    args = ap.parse_args(argv)
    grid = GridSpec(M=args.M)
    params = ModelParams(chi=args.chi, c=args.c)
    results = {}
    for name in sorted(_kernels.BACKENDS):
        secs, u = bench(name, grid, params, args.steps, args.repeat)
        results[name] = (secs, u)
        rate = args.steps * (grid.M + 1) / secs / 1e6
        print(f"{name:6s} {secs:8.3f} s  {rate:8.2f} Mnode-steps/s  "
              f"(full 250k-step run ~ {secs * grid.n_steps / args.steps:.1f} s)")
    if len(results) == 2:
        (t_np, u_np), (t_nb, u_nb) = results["numpy"], results["numba"]
        print(f"speed-up numba/numpy: {t_np / t_nb:.1f}x, max |du| = {np.max(np.abs(u_np - u_nb)):.1e}")


if __name__ == "__main__":
    main()
