"""Time the compiled and pure-Python reduced-path kernels on the same work.

    python3 benchmarks/bench_kernels.py --paths 2000 --steps 4000
"""
from __future__ import annotations

import argparse
import math
import time

import numpy as np

from collapse_lab import catalog, kernels, sde
from collapse_lab.geometry import Chart, ChartPoint


def run_once(backend: str, paths: int, steps: int, seed: int) -> tuple[float, np.ndarray]:
    cfg = sde.SimConfig(metric=catalog.instantiate("sphere_1d"), sigma=1.0, dt=1e-3, max_steps=steps,
                        start=ChartPoint(Chart.THETA, (2.0 * math.pi / 3.0, 0.0)), seed=seed,
                        n_trajectories=paths, backend=backend)
    t0 = time.perf_counter()
    ens = sde.run_ensemble(cfg)
    return time.perf_counter() - t0, ens.records


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--paths", type=int, default=2000)
    ap.add_argument("--steps", type=int, default=4000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args(argv)

    results = {}
    for name in kernels.BACKENDS:
        times = []
        for _ in range(args.repeat):
            dt, rec = run_once(name, args.paths, args.steps, args.seed)
            times.append(dt)
        results[name] = (min(times), rec)
        rate = args.paths * args.steps / min(times)
        print(f"{name:>7}: best {min(times):.3f} s over {args.repeat} runs ({rate:.3g} path-steps/s)")
    if {"cython", "python"} <= results.keys():
        same = np.array_equal(results["cython"][1], results["python"][1])
        print(f"speed-up {results['python'][0] / results['cython'][0]:.2f}x, records identical: {same}")


if __name__ == "__main__":
    main()
