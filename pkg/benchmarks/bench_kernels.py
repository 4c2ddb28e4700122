"""Compiled versus pure-Python kernels.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]

Prints one CSV row per kernel: name,size,compiled_s,python_s,speedup.
"""

import argparse
import time

import numpy as np

from spatialstat import _accel
from spatialstat import _kernels_py as python_kernels
from spatialstat.lattice import build_grid_graph, checkerboard_partition, homogeneous_car


def best(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def cases():
    rng = np.random.default_rng(0)
    pts = np.ascontiguousarray(rng.random((2000, 2)))
    yield "maxmin_order", 2000, lambda k: k.maxmin_order(pts, 0)
    yield "nearest_predecessors(q=20)", 2000, lambda k: k.nearest_predecessors(pts, 20, 2000)
    pp = np.ascontiguousarray(rng.random((500, 2)))
    radii = np.linspace(0.025, 0.25, 10)
    yield "translation_pair_sums", 500, lambda k: k.translation_pair_sums(pp, radii, 1.0, 1.0)
    model = homogeneous_car(build_grid_graph(30, 30), 0.2, 1.0)
    c = model.C
    first, second = checkerboard_partition(c)
    normals = rng.standard_normal((200, model.n_nodes))
    args = (c.indptr.astype(np.intc), c.indices.astype(np.intc), c.data, np.sqrt(model.tau2),
            first.astype(np.int64), second.astype(np.int64))
    yield "gibbs_sweeps(200 sweeps)", 900, lambda k: k.gibbs_sweeps(*args, np.zeros(model.n_nodes), normals, 50)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()
    compiled = _accel.compiled_kernels
    print("kernel,size,compiled_s,python_s,speedup")
    for name, size, fn in cases():
        py = best(lambda: fn(python_kernels), args.repeat)
        if compiled is None:
            print(f"{name},{size},nan,{py:.6f},nan")
            continue
        cy = best(lambda: fn(compiled), args.repeat)
        print(f"{name},{size},{cy:.6f},{py:.6f},{py / cy:.1f}")


if __name__ == "__main__":
    main()
