"""Neighbourhood graphs and Gaussian CAR models on lattices.

Precision matrices are factorised with a banded Cholesky after a reverse
Cuthill-McKee reordering, so sampling, conditioning and likelihood cost
O(m b^2) for bandwidth b instead of O(m^3).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy import optimize
from scipy.linalg.lapack import dtbtrs
from scipy.sparse.csgraph import reverse_cuthill_mckee

from . import gridio
from ._accel import kernels
from .core import GaussianSpec
from .errors import (
    AsymmetricPrecision,
    DimensionMismatch,
    FitDiverged,
    InputError,
    NotBipartite,
    NotPositiveDefinite,
    SingularSystem,
    ZeroSize,
)


# ---------------------------------------------------------------------------
# graphs
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class NeighborhoodGraph:
    """Lattice nodes with a sparse spatial-dependence matrix W (zero diagonal)."""

    nodes: np.ndarray
    weights: sp.csr_matrix
    shape: Optional[tuple] = None

    def __post_init__(self):
        w = sp.csr_matrix(self.weights, dtype=float)
        w.eliminate_zeros()
        w.sum_duplicates()
        w.sort_indices()
        if w.shape != (len(self.nodes), len(self.nodes)):
            raise DimensionMismatch("weight matrix must be m x m for m nodes")
        if np.any(w.diagonal() != 0):
            raise InputError("a node cannot be its own neighbour")
        object.__setattr__(self, "weights", w)

    @property
    def n_nodes(self):
        return len(self.nodes)

    def neighbors(self, i):
        w = self.weights
        return w.indices[w.indptr[i]:w.indptr[i + 1]].copy()

    def node_index(self, x, y):
        """Position of grid node (x, y), both 1-based as in the lattice coordinates."""
        nx, ny = self.shape
        if not (1 <= x <= nx and 1 <= y <= ny):
            raise InputError(f"grid node ({x}, {y}) is outside a {nx} x {ny} lattice")
        return (y - 1) * nx + (x - 1)

    def to_edge_csv(self, path):
        w = self.weights.tocoo()
        order = np.lexsort((w.col, w.row))
        gridio.write_csv(path, ["i", "j", "w"],
                         ((int(w.row[k]), int(w.col[k]), float(w.data[k])) for k in order))


def build_grid_graph(nx, ny, order="first"):
    """First-order (rook) adjacency on an nx by ny grid of nodes at (1..nx, 1..ny).

    Node (x, y) has position (y - 1) * nx + (x - 1); x varies fastest.
    """
    if order != "first":
        raise InputError("only first-order neighbourhoods are supported")
    nx, ny = int(nx), int(ny)
    if nx < 1 or ny < 1:
        raise ZeroSize("grid dimensions must be at least 1")
    ix, iy = np.meshgrid(np.arange(nx), np.arange(ny))
    ix, iy = ix.ravel(), iy.ravel()
    idx = iy * nx + ix
    rows, cols = [], []
    for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        jx, jy = ix + dx, iy + dy
        ok = (jx >= 0) & (jx < nx) & (jy >= 0) & (jy < ny)
        rows.append(idx[ok])
        cols.append(jy[ok] * nx + jx[ok])
    rows, cols = np.concatenate(rows), np.concatenate(cols)
    w = sp.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(nx * ny, nx * ny))
    nodes = np.column_stack([ix + 1.0, iy + 1.0])
    return NeighborhoodGraph(nodes, w, (nx, ny))


def _adjacency(graph_or_matrix):
    w = graph_or_matrix.weights if isinstance(graph_or_matrix, NeighborhoodGraph) else graph_or_matrix
    w = sp.csr_matrix(w)
    a = (abs(w) + abs(w).T).tocsr()
    a.setdiag(0)
    a.eliminate_zeros()
    return a


def checkerboard_partition(graph):
    """Two-colour the graph so that no edge joins nodes of the same colour.

    Returns ``(first, second)`` index arrays. In each connected component the
    lowest-indexed node is placed in ``first``.

    Raises
    ------
    NotBipartite
        With ``cycle`` listing the nodes of an odd cycle.
    """
    a = _adjacency(graph)
    m = a.shape[0]
    colour = np.full(m, -1, dtype=np.int64)
    parent = np.full(m, -1, dtype=np.int64)
    depth = np.zeros(m, dtype=np.int64)
    for root in range(m):
        if colour[root] >= 0:
            continue
        colour[root] = 0
        queue = deque([root])
        while queue:
            u = queue.popleft()
            for v in a.indices[a.indptr[u]:a.indptr[u + 1]]:
                if colour[v] < 0:
                    colour[v] = 1 - colour[u]
                    parent[v] = u
                    depth[v] = depth[u] + 1
                    queue.append(v)
                elif colour[v] == colour[u]:
                    raise NotBipartite(_odd_cycle(u, v, parent, depth))
    return np.flatnonzero(colour == 0), np.flatnonzero(colour == 1)


def _odd_cycle(u, v, parent, depth):
    left, right = [u], [v]
    while depth[left[-1]] > depth[right[-1]]:
        left.append(parent[left[-1]])
    while depth[right[-1]] > depth[left[-1]]:
        right.append(parent[right[-1]])
    while left[-1] != right[-1]:
        left.append(parent[left[-1]])
        right.append(parent[right[-1]])
    return [int(x) for x in left + right[-2::-1]]


# ---------------------------------------------------------------------------
# banded factorisation of sparse SPD matrices
# ---------------------------------------------------------------------------

class BandedCholesky:
    """Cholesky factor Q[p][:, p] = U'U of a sparse SPD matrix, stored in band form.

    ``p`` is a reverse Cuthill-McKee permutation that keeps the bandwidth small.
    """

    def __init__(self, q, perm=None):
        q = sp.csr_matrix(q)
        m = q.shape[0]
        self.m = m
        self.perm = reverse_cuthill_mckee(q, symmetric_mode=True).astype(np.int64) if perm is None \
            else np.asarray(perm, dtype=np.int64)
        qp = q[self.perm][:, self.perm].tocoo()
        upper = qp.row <= qp.col
        rows, cols, vals = qp.row[upper], qp.col[upper], qp.data[upper]
        self.bandwidth = int(np.max(cols - rows)) if rows.size else 0
        b = self.bandwidth
        ab = np.zeros((b + 1, m))
        np.add.at(ab, (b + rows - cols, cols), vals)
        self.band = sla.cholesky_banded(ab, lower=False, check_finite=False)

    def _permute_in(self, x):
        return x[self.perm]

    def _permute_out(self, y):
        out = np.empty_like(y)
        out[self.perm] = y
        return out

    def logdet(self):
        return 2.0 * float(np.log(self.band[-1]).sum())

    def solve(self, rhs):
        """Q^{-1} rhs for a vector or an (m, k) matrix."""
        rp = self._permute_in(np.asarray(rhs, dtype=float))
        x = sla.cho_solve_banded((self.band, False), rp, check_finite=False)
        return self._permute_out(x)

    def sample_solve(self, z):
        """U^{-1} z mapped back to original order; covariance Q^{-1} for z ~ N(0, I)."""
        z = np.asarray(z, dtype=float)
        mat = z if z.ndim == 2 else z[:, None]
        x, info = dtbtrs(self.band, mat, uplo="U", trans="N", diag="N")
        if info != 0:
            raise NotPositiveDefinite("triangular band solve failed")
        out = self._permute_out(x)
        return out if z.ndim == 2 else out[:, 0]


def _factor_or_raise(q, what, exc=NotPositiveDefinite):
    try:
        return BandedCholesky(q)
    except np.linalg.LinAlgError:
        min_eig = None
        if q.shape[0] <= 2000:
            min_eig = float(np.linalg.eigvalsh(q.toarray())[0])
        if exc is NotPositiveDefinite:
            raise NotPositiveDefinite(f"{what} is not positive definite (min eigenvalue {min_eig})",
                                      min_eig) from None
        raise exc(f"{what} is not positive definite") from None


# ---------------------------------------------------------------------------
# CAR models
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CarModel:
    """Gaussian CAR model Y ~ Gau(0, (I - C)^{-1} M) with M = diag(tau2).

    Build through :func:`validate_car` or :func:`homogeneous_car`.
    """

    C: sp.csr_matrix
    tau2: np.ndarray
    graph: Optional[NeighborhoodGraph] = None
    factor: BandedCholesky = field(default=None, repr=False)

    @property
    def n_nodes(self):
        return len(self.tau2)

    @property
    def precision(self):
        m = self.n_nodes
        return sp.diags(1.0 / self.tau2) @ (sp.identity(m, format="csr") - self.C)

    def covariance(self):
        """Dense (I - C)^{-1} M."""
        m = self.n_nodes
        return np.linalg.solve(np.eye(m) - self.C.toarray(), np.diag(self.tau2))

    @property
    def joint(self):
        cov = self.covariance()
        return GaussianSpec(np.zeros(self.n_nodes), 0.5 * (cov + cov.T))


def validate_car(C, M, graph=None):
    """Check that (C, M) define a valid Gaussian CAR model and factorise its precision.

    Parameters
    ----------
    C : array_like or sparse matrix, shape (m, m)
        Autoregressive coefficients with zero diagonal.
    M : array_like
        Conditional variances, either a length-m vector or a diagonal matrix.
    graph : NeighborhoodGraph, optional
        When given, c_ij may be non-zero only where w_ij is.

    Raises
    ------
    AsymmetricPrecision
        If M^{-1}(I - C) is not symmetric within 1e-10.
    NotPositiveDefinite
        If the precision has no Cholesky factor.
    """
    c = sp.csr_matrix(C, dtype=float)
    c.eliminate_zeros()
    c.sum_duplicates()
    c.sort_indices()
    m = c.shape[0]
    if c.shape != (m, m):
        raise DimensionMismatch("C must be square")
    tau2 = np.asarray(M, dtype=float)
    if tau2.ndim == 2:
        if tau2.shape != (m, m) or np.any(tau2 - np.diag(np.diag(tau2))):
            raise DimensionMismatch("M must be an m x m diagonal matrix")
        tau2 = np.diag(tau2).copy()
    tau2 = np.broadcast_to(tau2, (m,)).astype(float)
    if np.any(~(tau2 > 0)):
        raise InputError("conditional variances must be strictly positive")
    if np.any(c.diagonal() != 0):
        raise InputError("C must have a zero diagonal")
    if graph is not None:
        if graph.n_nodes != m:
            raise DimensionMismatch("graph size does not match C")
        outside = c.multiply(graph.weights != 0) - c
        if outside.count_nonzero():
            raise InputError("C has non-zero coefficients between non-neighbours")
    q = (sp.diags(1.0 / tau2) @ (sp.identity(m, format="csr") - c)).tocsr()
    asym = abs(q - q.T)
    scale = max(1.0, float(abs(q).max()))
    if asym.nnz and asym.max() > 1e-10 * scale:
        raise AsymmetricPrecision("M^{-1}(I - C) is not symmetric: need c_ij / tau2_i = c_ji / tau2_j")
    q = 0.5 * (q + q.T)
    factor = _factor_or_raise(q.tocsr(), "M^{-1}(I - C)")
    tau2.setflags(write=False)
    return CarModel(c, tau2, graph, factor)


def car_rho_bounds(graph):
    """Interval (1/lambda_min(W), 1/lambda_max(W)) of valid homogeneous CAR rho."""
    w = graph.weights
    if graph.n_nodes <= 2000:
        ev = np.linalg.eigvalsh(w.toarray())
        lo, hi = ev[0], ev[-1]
    else:
        from scipy.sparse.linalg import eigsh

        lo = eigsh(w, k=1, which="SA", return_eigenvectors=False)[0]
        hi = eigsh(w, k=1, which="LA", return_eigenvectors=False)[0]
    return (1.0 / lo if lo < 0 else -np.inf, 1.0 / hi if hi > 0 else np.inf)


def homogeneous_car(graph, rho, tau2):
    """C = rho W and M = tau2 I for a symmetric weight matrix W."""
    m = graph.n_nodes
    return validate_car(rho * graph.weights, np.full(m, float(tau2)), graph)


def sample_car(model, n_samples, seed=None, method="exact", burn_in=50):
    """Draw fields from a CAR model.

    ``method='exact'`` solves U x = z against the banded Cholesky factor of the
    precision. ``method='gibbs'`` runs checkerboard Gibbs sweeps (both colour
    classes per sweep) from a zero field, discarding ``burn_in`` sweeps and
    keeping every sweep after that.

    Returns
    -------
    ndarray, shape (n_samples, m)
    """
    rng = np.random.default_rng(seed)
    m = model.n_nodes
    n_samples = int(n_samples)
    if method == "exact":
        z = rng.standard_normal((n_samples, m))
        return np.ascontiguousarray(model.factor.sample_solve(z.T).T)
    if method != "gibbs":
        raise InputError(f"unknown sampling method {method!r}")
    first, second = checkerboard_partition(model.C)
    c = model.C
    normals = rng.standard_normal((burn_in + n_samples, m))
    y = np.zeros(m)
    return kernels.gibbs_sweeps(c.indptr.astype(np.intc), c.indices.astype(np.intc), c.data,
                                np.sqrt(model.tau2), first.astype(np.int64), second.astype(np.int64),
                                y, normals, int(burn_in))


def _split_observations(m, observed_indices, observed_values, noise_variances):
    obs = np.asarray(observed_indices, dtype=np.int64).ravel()
    z = np.asarray(observed_values, dtype=float).ravel()
    if obs.size != z.size:
        raise DimensionMismatch("observed indices and values differ in length")
    if np.unique(obs).size != obs.size:
        raise InputError("observed node indices must be distinct")
    if obs.size and (obs.min() < 0 or obs.max() >= m):
        raise InputError("observed node index out of range")
    noise = np.broadcast_to(np.asarray(0.0 if noise_variances is None else noise_variances, dtype=float),
                            obs.shape)
    if np.any(noise < 0):
        raise InputError("noise variances must be non-negative")
    return obs, z, noise


class _Posterior:
    """Posterior of Y given exact observations on E and noisy ones elsewhere."""

    def __init__(self, model, obs, z, noise):
        m = model.n_nodes
        prec = model.precision
        q = sp.csr_matrix(0.5 * (prec + prec.T))
        exact = noise == 0
        self.e_idx, self.e_val = obs[exact], z[exact]
        self.u_idx = np.setdiff1d(np.arange(m), self.e_idx)
        pos = np.full(m, -1, dtype=np.int64)
        pos[self.u_idx] = np.arange(self.u_idx.size)
        self.pos = pos
        q_uu = q[self.u_idx][:, self.u_idx]
        q_ue = q[self.u_idx][:, self.e_idx]
        self.q = q
        self.q_uu = q_uu
        self.prior_shift = -(q_ue @ self.e_val)
        self.n_idx = pos[obs[~exact]]
        self.n_val = z[~exact]
        self.n_var = noise[~exact]
        if self.u_idx.size == 0:
            self.mean_u = np.zeros(0)
            return
        try:
            self.prior_factor = BandedCholesky(q_uu)
        except np.linalg.LinAlgError:
            raise SingularSystem("conditional precision is not positive definite") from None
        self.prior_mean_u = self.prior_factor.solve(self.prior_shift)
        prec = q_uu + sp.csr_matrix((1.0 / self.n_var, (self.n_idx, self.n_idx)), shape=q_uu.shape)
        rhs = self.prior_shift.copy()
        np.add.at(rhs, self.n_idx, self.n_val / self.n_var)
        try:
            self.post_factor = BandedCholesky(prec)
        except np.linalg.LinAlgError:
            raise SingularSystem("posterior precision is not positive definite") from None
        self.mean_u = self.post_factor.solve(rhs)


def car_predict(model, observed_indices, observed_values, noise_variances=None, targets=None):
    """Predictive means and variances of Y at ``targets`` given Z = Y_obs + noise.

    Targets need not carry a datum. Observations with zero noise variance are
    treated as exact.

    Returns
    -------
    means, variances : ndarray
    """
    m = model.n_nodes
    obs, z, noise = _split_observations(m, observed_indices, observed_values, noise_variances)
    targets = np.arange(m) if targets is None else np.asarray(targets, dtype=np.int64).ravel()
    post = _Posterior(model, obs, z, noise)
    means = np.empty(targets.size)
    variances = np.zeros(targets.size)
    exact_lookup = dict(zip(post.e_idx.tolist(), post.e_val.tolist()))
    free = []
    for k, t in enumerate(targets):
        if t in exact_lookup:
            means[k] = exact_lookup[t]
        else:
            free.append(k)
    if free:
        free = np.asarray(free)
        rows = post.pos[targets[free]]
        means[free] = post.mean_u[rows]
        e = np.zeros((post.u_idx.size, rows.size))
        e[rows, np.arange(rows.size)] = 1.0
        variances[free] = np.einsum("ij,ij->j", e, post.post_factor.solve(e))
    return means, variances


def car_loglik(model, observed_indices, observed_values, noise_variances=None):
    """Marginal Gaussian log-likelihood of the data, computed from sparse factors only."""
    m = model.n_nodes
    obs, z, noise = _split_observations(m, observed_indices, observed_values, noise_variances)
    post = _Posterior(model, obs, z, noise)
    log2pi = np.log(2 * np.pi)
    ll = 0.0
    n_e = post.e_idx.size
    if n_e:
        y = np.zeros(m)
        y[post.e_idx] = post.e_val
        if post.u_idx.size:
            y[post.u_idx] = post.prior_mean_u
        logdet_uu = post.prior_factor.logdet() if post.u_idx.size else 0.0
        ll += -0.5 * n_e * log2pi + 0.5 * model.factor.logdet() - 0.5 * logdet_uu - 0.5 * float(y @ (post.q @ y))
    if post.n_idx.size:
        mu = post.prior_mean_u
        mean = post.mean_u
        r = post.n_val - mean[post.n_idx]
        ll += float(np.sum(-0.5 * (log2pi + np.log(post.n_var) + r * r / post.n_var)))
        d = mean - mu
        ll += 0.5 * post.prior_factor.logdet() - 0.5 * float(d @ (post.q_uu @ d))
        ll -= 0.5 * post.post_factor.logdet()
    return float(ll)


def fit_homogeneous_car(graph, observed_indices, observed_values, noise_variances=None):
    """Maximum-likelihood (rho, tau2) for C = rho W, M = tau2 I.

    Returns the fitted :class:`CarModel` and the maximised log-likelihood.
    """
    lo, hi = car_rho_bounds(graph)
    lo, hi = max(lo, -1e6), min(hi, 1e6)
    span = hi - lo

    def unpack(theta):
        frac = 1.0 / (1.0 + np.exp(-theta[0]))
        return lo + span * (1e-6 + (1 - 2e-6) * frac), float(np.exp(theta[1]))

    def objective(theta):
        rho, tau2 = unpack(theta)
        try:
            mod = homogeneous_car(graph, rho, tau2)
            return -car_loglik(mod, observed_indices, observed_values, noise_variances)
        except (NotPositiveDefinite, SingularSystem):
            return 1e300

    z = np.asarray(observed_values, dtype=float)
    x0 = np.array([0.0, np.log(max(float(np.var(z)), 1e-8))])
    res = optimize.minimize(objective, x0, method="Nelder-Mead",
                            options=dict(maxiter=500, xatol=1e-8, fatol=1e-8))
    if not np.isfinite(res.fun) or res.fun >= 1e300:
        raise FitDiverged("CAR likelihood could not be maximised")
    rho, tau2 = unpack(res.x)
    return homogeneous_car(graph, rho, tau2), -float(res.fun)


def field_to_raster(path, graph, values):
    """Write a lattice field (one value per grid node) as a text raster."""
    nx, ny = graph.shape
    arr = np.asarray(values, dtype=float).reshape(ny, nx)
    gridio.write_ascii_grid(path, arr, 0.5, 0.5, 1.0)


__all__ = [
    "NeighborhoodGraph",
    "CarModel",
    "BandedCholesky",
    "build_grid_graph",
    "checkerboard_partition",
    "validate_car",
    "homogeneous_car",
    "car_rho_bounds",
    "sample_car",
    "car_predict",
    "car_loglik",
    "fit_homogeneous_car",
    "field_to_raster",
]
