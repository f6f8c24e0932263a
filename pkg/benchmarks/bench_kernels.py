"""Compare the compiled and numpy kernel backends.

    python3 benchmarks/bench_kernels.py [--repeat N] [--full]

Times the z-buffer splat and the greedy gain count on both backends and
checks that their outputs agree. ``--full`` also times a complete
adaptive_sample run (128 candidates at 504x392) per backend, each in a
fresh interpreter because the backend is chosen at import.
"""
import argparse
import os
import subprocess
import sys
import time

import numpy as np

from georecon import kernels
from georecon.synthetic import SyntheticSceneSpec, build_synthetic

FULL_RUN = """
import time
from georecon import SamplerConfig, adaptive_sample, kernels
from georecon.synthetic import SyntheticSceneSpec, build_synthetic
sc = build_synthetic(SyntheticSceneSpec(seed=9, n_frames=128, width=504, height=392))
t0 = time.perf_counter()
adaptive_sample(sc.manifest, dict(enumerate(sc.depths)), SamplerConfig(128, 8))
print(kernels.BACKEND, time.perf_counter() - t0)
"""


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def splat_inputs(seed=0, n=200_000, w=504, h=392):
    rng = np.random.default_rng(seed)
    return (rng.uniform(0, w, n), rng.uniform(0, h, n), rng.uniform(0.5, 6, n),
            np.arange(n, dtype=np.int64), w, h, 1.0)


def greedy_inputs(seed=0, m=128, n_points=80_000):
    rng = np.random.default_rng(seed)
    sizes = rng.integers(2000, 12000, m)
    sets = [np.unique(rng.integers(0, n_points, s)) for s in sizes]
    offsets = np.zeros(m + 1, dtype=np.int64)
    offsets[1:] = np.cumsum([len(s) for s in sets])
    covered = (rng.random(n_points) < 0.3).astype(np.uint8)
    skip = (rng.random(m) < 0.1).astype(np.uint8)
    return np.concatenate(sets).astype(np.int64), offsets, covered, skip


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--full", action="store_true")
    args = ap.parse_args()

    backends = kernels.backends()
    print(f"default backend: {kernels.BACKEND}; available: {', '.join(backends)}")
    splat = splat_inputs()
    greedy = greedy_inputs()
    results = {}
    print(f"{'kernel':<18}{'backend':<10}{'best (ms)':>12}")
    for name, mod in backends.items():
        t_s, out_s = best_of(lambda: mod.splat_zbuffer(*splat), args.repeat)
        t_g, out_g = best_of(lambda: mod.uncovered_counts(*greedy), args.repeat)
        results[name] = (out_s, out_g)
        print(f"{'splat_zbuffer':<18}{name:<10}{1e3 * t_s:>12.2f}")
        print(f"{'uncovered_counts':<18}{name:<10}{1e3 * t_g:>12.2f}")
    if len(results) == 2:
        (zs_a, w_a), g_a = results["python"]
        (zs_b, w_b), g_b = results["cython"]
        same = np.array_equal(zs_a, zs_b) and np.array_equal(w_a, w_b) and np.array_equal(g_a, g_b)
        print(f"outputs identical: {same}")

    if args.full:
        # warm the scene generator once so both timings exclude import costs
        build_synthetic(SyntheticSceneSpec(n_frames=1, width=56, height=28))
        for name in backends:
            env = dict(os.environ, GEORECON_PURE_PYTHON="1" if name == "python" else "0")
            res = subprocess.run([sys.executable, "-c", FULL_RUN], env=env, capture_output=True, text=True,
                                 check=True)
            backend, secs = res.stdout.split()
            print(f"adaptive_sample 128 x 504x392 [{backend}]: {float(secs):.2f} s")


if __name__ == "__main__":
    main()
