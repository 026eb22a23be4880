"""Time the numba kernels against their numpy twins, plus one optimizer run per backend.

    python3 benchmarks/bench_kernels.py [--repeat 20] [--skip-end-to-end]
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from mfmsbo import _kernels
from mfmsbo._accel import use_numba

# (candidates, training points) in the shape the EI ascent sees them
SIZES = [(105, 60), (105, 300), (500, 300)]
KINDS = {"squared_l2": 0, "total_variation": 1, "jensen_shannon": 2}


def best_of(fn, repeat):
    fn()  # warm-up (and JIT compile)
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def kernel_table(repeat):
    rng = np.random.default_rng(0)
    rows = []
    for P, N in SIZES:
        X = rng.dirichlet(np.ones(5), size=P)
        B = rng.dirichlet(np.ones(5), size=N)
        C = rng.standard_normal((P, N))
        V = rng.standard_normal((P, 5))
        for name, code in KINDS.items():
            pairs = [
                ("pairwise_distances", _kernels.pairwise_distances_np, _kernels._pairwise_distances_nb, (X, B, code)),
                ("distance_grad", _kernels.weighted_distance_grad_np, _kernels._weighted_distance_grad_nb, (X, B, C, code)),
            ]
            for label, f_np, f_nb, args in pairs:
                t_np = best_of(lambda: f_np(*args), repeat)
                t_nb = best_of(lambda: f_nb(*args), repeat)
                rows.append((f"{label}[{name}]", P, N, t_np, t_nb))
        t_np = best_of(lambda: _kernels.project_rows_np(V), repeat)
        t_nb = best_of(lambda: _kernels._project_rows_nb(V), repeat)
        rows.append(("project_rows", P, 5, t_np, t_nb))
    return rows


END_TO_END = """
import time
from mfmsbo.optimizer import run
from mfmsbo.space import SearchSpace
from mfmsbo.simulator.surface import acceptance_surface
spec = acceptance_surface(0)
t = time.perf_counter()
res = run(SearchSpace(), spec, "val_wikipedia", 40 * 19700, seed=0)
print(time.perf_counter() - t, res.iterations)
"""


def end_to_end():
    out = {}
    for label, flag in (("numba", "0"), ("numpy", "1")):
        env = dict(os.environ, MFMSBO_DISABLE_NUMBA=flag)
        proc = subprocess.run([sys.executable, "-c", END_TO_END], env=env, capture_output=True, text=True, check=True)
        secs, iters = proc.stdout.split()
        out[label] = (float(secs), int(iters))
    return out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--skip-end-to-end", action="store_true")
    args = ap.parse_args()
    if not use_numba():
        print("numba is disabled or missing; both columns time the same python code")
    print(f"{'kernel':<36s} {'P':>5s} {'N':>5s} {'numpy ms':>10s} {'numba ms':>10s} {'ratio':>7s}")
    for label, P, N, t_np, t_nb in kernel_table(args.repeat):
        print(f"{label:<36s} {P:>5d} {N:>5d} {t_np * 1e3:>10.3f} {t_nb * 1e3:>10.3f} {t_np / t_nb:>7.2f}")
    if not args.skip_end_to_end:
        res = end_to_end()
        for label, (secs, iters) in res.items():
            print(f"optimizer run, {label:<6s} backend: {secs:6.2f} s for {iters} iterations")


if __name__ == "__main__":
    main()
