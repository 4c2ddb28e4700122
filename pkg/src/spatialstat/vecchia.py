"""Vecchia approximation: ordered conditional factorisation with at most q neighbours.

Node i (in the artificial ordering) is conditioned only on its q nearest
predecessors, giving a sparse unit-lower-triangular representation
(I - A) x = e, e ~ N(0, D), of a valid joint Gaussian.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.spatial import cKDTree

from ._accel import kernels
from .core import as_locations, check_distinct
from .errors import DimensionMismatch, InputError, SingularNeighborBlock, SingularSystem

STRATEGIES = ("maxmin", "coordinate-sort")
LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True, eq=False)
class Ordering:
    """``perm[k]`` is the original index of the k-th ordered location."""

    perm: np.ndarray
    strategy: str

    @property
    def n(self):
        return len(self.perm)

    @property
    def rank(self):
        r = np.empty_like(self.perm)
        r[self.perm] = np.arange(self.n)
        return r


def order_locations(locations, strategy="maxmin"):
    """Coordinate-sort (x, then y, then z) or greedy max-min distance ordering.

    Max-min starts from the location nearest the centroid; ties go to the
    lowest original index.
    """
    loc = as_locations(locations)
    check_distinct(loc)
    if strategy == "coordinate-sort":
        perm = np.lexsort(loc.T[::-1])
    elif strategy == "maxmin":
        d2 = ((loc - loc.mean(axis=0)) ** 2).sum(axis=1)
        perm = kernels.maxmin_order(np.ascontiguousarray(loc), int(np.argmin(d2)))
    else:
        raise InputError(f"unknown ordering strategy {strategy!r}; use one of {STRATEGIES}")
    return Ordering(np.asarray(perm, dtype=np.int64), strategy)


@dataclass(frozen=True, eq=False)
class NeighborDag:
    """Neighbour sets in ordered indices, shape (n, q), padded with -1.

    Nodes at positions >= ``n_data`` are prediction nodes whose neighbours are
    restricted to data nodes.
    """

    ordering: Ordering
    neighbors: np.ndarray
    q: int
    n_data: int

    @property
    def n(self):
        return self.ordering.n

    def neighbor_set(self, i):
        row = self.neighbors[i]
        return row[row >= 0]

    def to_csv(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("node_order,neighbor_order_indices\n")
            for i in range(self.n):
                fh.write(",".join(str(int(v)) for v in (i, *self.neighbor_set(i))) + "\n")


def select_neighbors(ordering, locations, q, n_data=None):
    """Each ordered node gets its ``q`` nearest Euclidean predecessors.

    Ties go to the lowest order index. With ``n_data`` set, nodes at positions
    ``n_data`` and later may only pick neighbours among the first ``n_data``.
    """
    q = int(q)
    if q < 0:
        raise InputError("q must be non-negative")
    loc = as_locations(locations)
    if len(loc) != ordering.n:
        raise DimensionMismatch("ordering and locations differ in length")
    n_data = ordering.n if n_data is None else int(n_data)
    coords = np.ascontiguousarray(loc[ordering.perm])
    nbrs = kernels.nearest_predecessors(coords, q, n_data)
    return NeighborDag(ordering, np.asarray(nbrs, dtype=np.int64), q, n_data)


@dataclass(frozen=True, eq=False)
class VecchiaFactor:
    """Conditional regressions x_i = sum_j coef_ij x_nbr(i, j) + e_i, var(e_i) = resid_i."""

    dag: NeighborDag
    coefs: np.ndarray
    resid: np.ndarray

    def sparse_factor(self):
        """(I - A) in ordered coordinates as CSR."""
        n, q = self.coefs.shape
        rows = np.repeat(np.arange(n), q)
        cols = self.dag.neighbors.ravel()
        ok = cols >= 0
        a = sp.csr_matrix((-self.coefs.ravel()[ok], (rows[ok], cols[ok])), shape=(n, n))
        return (sp.identity(n, format="csr") + a).tocsr()


def _conditional_regressions(model, pool, targets, nbrs, node_var, nbr_var):
    """Batched solves of K_NN c = k_N for every target node.

    Neighbour indices point into ``pool``. ``node_var[i]`` is the marginal
    variance of target i and ``nbr_var[j]`` that of pool node j. Padded slots get unit
    diagonal and zero cross-covariance so they drop out.
    """
    n, q = nbrs.shape
    if q == 0:
        return np.zeros((n, 0)), node_var.copy()
    valid = nbrs >= 0
    idx = np.where(valid, nbrs, 0)
    pts = pool[idx]
    diff = pts[:, :, None, :] - pts[:, None, :, :]
    k_nn = model.continuous(np.sqrt((diff * diff).sum(axis=-1)))
    both = valid[:, :, None] & valid[:, None, :]
    k_nn = np.where(both, k_nn, 0.0)
    diag = np.where(valid, nbr_var[idx], 1.0)
    ar = np.arange(q)
    k_nn[:, ar, ar] = diag
    dist = np.sqrt(((pts - targets[:, None, :]) ** 2).sum(axis=-1))
    k_n = np.where(valid, model.continuous(dist), 0.0)
    try:
        chol = np.linalg.cholesky(k_nn)
    except np.linalg.LinAlgError:
        raise SingularNeighborBlock("a neighbour covariance block is not positive definite") from None
    w = np.linalg.solve(chol, k_n[..., None])[..., 0]
    coefs = np.linalg.solve(np.swapaxes(chol, -1, -2), w[..., None])[..., 0]
    resid = node_var - (w * w).sum(axis=1)
    return coefs, resid


def build_vecchia_factor(dag, model, locations, measurement_noise=0.0):
    """Per-node conditional coefficients and residual variances.

    Measurement noise is folded into the marginal variance of each data node,
    so the factor describes the noisy observations directly.
    """
    loc = as_locations(locations)
    if len(loc) != dag.n:
        raise DimensionMismatch("DAG and locations differ in length")
    coords = loc[dag.ordering.perm]
    noise = np.broadcast_to(np.asarray(measurement_noise, dtype=float), (dag.n,))[dag.ordering.perm]
    if np.any(noise < 0):
        raise InputError("measurement noise must be non-negative")
    var = model.total_variance + noise
    coefs, resid = _conditional_regressions(model, coords, coords, dag.neighbors, var, var)
    scale = max(1.0, float(np.max(var)))
    if np.any(resid <= 1e-12 * scale):
        raise SingularNeighborBlock("non-positive conditional variance in the Vecchia factor")
    return VecchiaFactor(dag, coefs, resid)


def _centred_ordered(factor, values, mean):
    x = np.asarray(values, dtype=float).ravel()
    if x.size != factor.dag.n:
        raise DimensionMismatch("one value per node is required")
    mu = np.broadcast_to(np.asarray(mean, dtype=float), x.shape)
    return (x - mu)[factor.dag.ordering.perm]


def vecchia_loglik(factor, values, mean=0.0):
    """Sum of the per-node conditional Gaussian log-densities."""
    x = _centred_ordered(factor, values, mean)
    nbrs = factor.dag.neighbors
    pred = (factor.coefs * np.where(nbrs >= 0, x[np.maximum(nbrs, 0)], 0.0)).sum(axis=1)
    r = x - pred
    return float(-0.5 * np.sum(LOG_2PI + np.log(factor.resid) + r * r / factor.resid))


def implied_covariance(factor):
    """Dense covariance of the Vecchia joint in the original location order."""
    u = factor.sparse_factor().toarray()
    inv = sla.solve_triangular(u, np.eye(factor.dag.n), lower=True)
    cov = (inv * factor.resid[None, :]) @ inv.T
    rank = factor.dag.ordering.rank
    cov = cov[np.ix_(rank, rank)]
    return 0.5 * (cov + cov.T)


def nearest_data_neighbors(data, sites, q):
    """The ``q`` nearest rows of ``data`` for each site; ties to the lower row.

    Same selection as :func:`select_neighbors` for prediction nodes, using a
    k-d tree for the candidates and exact squared distances for the final cut.
    """
    m, n = len(sites), len(data)
    out = np.full((m, q), -1, dtype=np.int64)
    k = min(q, n)
    if k == 0 or m == 0:
        return out
    tree = cKDTree(data)
    dist, _ = tree.query(sites, k=k)
    radius = np.atleast_2d(dist.reshape(m, k))[:, -1]
    for i, cand in enumerate(tree.query_ball_point(sites, radius * (1 + 1e-9) + 1e-300)):
        cand = np.sort(np.asarray(cand, dtype=np.int64))
        diff = data[cand] - sites[i]
        d2 = (diff * diff).sum(axis=1)
        out[i, :k] = cand[np.argsort(d2, kind="stable")[:k]]
    return out


@dataclass(frozen=True)
class VecchiaPrediction:
    prediction: np.ndarray
    variance: np.ndarray
    dag: NeighborDag

    @property
    def standard_error(self):
        return np.sqrt(self.variance)


def vecchia_krige(dataset, model, sites, q, strategy="maxmin", measurement_noise=0.0, known_mean=0.0):
    """Approximate simple kriging with prediction nodes ordered after the data.

    Each prediction node conditions on its ``q`` nearest data nodes only, so
    predictions are independent small conditionings. ``q >= n`` reproduces
    exact simple kriging. Data-node rows of the returned DAG are left empty
    since prediction never uses them.
    """
    sites = np.atleast_2d(np.asarray(sites, dtype=float))
    if sites.shape[1] != dataset.dim:
        raise DimensionMismatch("prediction sites have the wrong dimension")
    n, m = dataset.n, len(sites)
    q = int(q)
    if q < 0:
        raise InputError("q must be non-negative")
    ordering = order_locations(dataset.locations, strategy)
    full = Ordering(np.concatenate([ordering.perm, n + np.arange(m)]), strategy)
    data = dataset.locations[ordering.perm]
    pred_nbrs = nearest_data_neighbors(data, sites, q)
    nbrs = np.vstack([np.full((n, q), -1, dtype=np.int64), pred_nbrs])
    dag = NeighborDag(full, nbrs, q, n)
    noise = np.broadcast_to(np.asarray(measurement_noise, dtype=float), (n,))[ordering.perm]
    if np.any(noise < 0):
        raise InputError("measurement noise must be non-negative")
    data_var = model.total_variance + noise
    target_var = np.full(m, model.total_variance)
    try:
        coefs, var = _conditional_regressions(model, data, sites, pred_nbrs, target_var, data_var)
    except SingularNeighborBlock as exc:
        raise SingularSystem(str(exc)) from None
    mu = np.broadcast_to(np.asarray(known_mean, dtype=float), ())
    z = dataset.values[ordering.perm] - mu
    zn = np.where(pred_nbrs >= 0, z[np.maximum(pred_nbrs, 0)], 0.0)
    pred = mu + (coefs * zn).sum(axis=1)
    tol = 1e-10 * max(1.0, model.total_variance)
    if np.any(var < -tol):
        raise SingularSystem("negative prediction variance")
    return VecchiaPrediction(pred, np.maximum(var, 0.0), dag)


def benchmark_row(n, q, loglik_err, rmse, seconds):
    """One ``n,q,loglik_err,rmse,seconds`` CSV row."""
    return f"{n},{q},{loglik_err:.6g},{rmse:.6g},{seconds:.6g}"


__all__ = [
    "Ordering",
    "NeighborDag",
    "VecchiaFactor",
    "VecchiaPrediction",
    "order_locations",
    "select_neighbors",
    "build_vecchia_factor",
    "vecchia_loglik",
    "vecchia_krige",
    "implied_covariance",
    "nearest_data_neighbors",
    "benchmark_row",
]
