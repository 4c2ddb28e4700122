"""Vecchia accuracy and runtime against the dense Gaussian computation.

Usage: python3 benchmarks/bench_vecchia.py [--n 500 1000 2000] [--q 5 10 20 40]

For each n, data are simulated on a jittered grid in the unit square from an
exponential covariance (sill 1, range 0.2). Each row reports the absolute
log-likelihood error, the RMSE of Vecchia predictions against exact simple
kriging at 50 held-out sites, and the Vecchia prediction time in seconds.
q = 0 rows carry the dense timing for reference.
"""

import argparse
import time

import numpy as np

from spatialstat.core import build_dataset, gaussian_logpdf
from spatialstat.covariance import CovarianceModel, gram_matrix
from spatialstat.kriging import KrigingSystem
from spatialstat.vecchia import (
    benchmark_row,
    build_vecchia_factor,
    order_locations,
    select_neighbors,
    vecchia_krige,
    vecchia_loglik,
)


def timed(fn):
    t = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, nargs="+", default=[500, 1000, 2000])
    parser.add_argument("--q", type=int, nargs="+", default=[5, 10, 20, 40])
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    model = CovarianceModel("exponential", 1.0, 0.2, 0.0)
    print("n,q,loglik_err,rmse,seconds")
    for n in args.n:
        rng = np.random.default_rng(args.seed + n)
        side = int(np.ceil(np.sqrt(n)))
        cells = np.array([(i, j) for i in range(side) for j in range(side)][:n], dtype=float)
        loc = (cells + 0.5 + 0.3 * (rng.random((n, 2)) - 0.5)) / side
        sites = rng.random((50, 2))
        allpts = np.vstack([loc, sites])
        x = np.linalg.cholesky(gram_matrix(model, allpts)) @ rng.standard_normal(len(allpts))
        ds = build_dataset(loc, x[:n])
        exact_ll = gaussian_logpdf(ds.values, np.zeros(n), gram_matrix(model, loc))
        (exact, _, _), dense = timed(lambda: KrigingSystem(loc, ds.values, model).predict(sites))
        print(benchmark_row(n, 0, float("nan"), 0.0, dense))
        ordering = order_locations(loc)
        for q in args.q:
            factor = build_vecchia_factor(select_neighbors(ordering, loc, q), model, loc)
            err = abs(vecchia_loglik(factor, ds.values) - exact_ll)
            pred, seconds = timed(lambda: vecchia_krige(ds, model, sites, q))
            rmse = float(np.sqrt(np.mean((pred.prediction - exact) ** 2)))
            print(benchmark_row(n, q, err, rmse, seconds))


if __name__ == "__main__":
    main()
