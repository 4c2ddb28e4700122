"""Bivariate fields built by conditioning the second variable on the first.

The second variable is a linear functional of the first plus independent
noise::

    Y2(s) = mu2(s) + int b(s, v) (Y1(v) - mu1(v)) dv + delta(s),

with cov(delta) = C_{2|1}. The integrals over the window are approximated by
midpoint sums over a BAU grid.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.spatial.distance import cdist

from .core import GaussianSpec, as_locations, check_distinct, gaussian_condition
from .covariance import _gram, cross_covariance
from .errors import (
    DimensionMismatch,
    GridTooCoarse,
    InputError,
    NotPositiveDefinite,
    SingularCovariance,
    SingularSystem,
)

EIGEN_FLOOR = 1e-8


@dataclass(frozen=True, eq=False)
class InteractionKernel:
    """Integrable interaction function b(s, v), possibly asymmetric.

    ``func(s, v)`` takes an (n, d) and an (m, d) array and returns an (n, m)
    matrix of kernel values.
    """

    func: Callable
    name: str = "custom"

    def __call__(self, s, v):
        s = np.atleast_2d(np.asarray(s, dtype=float))
        v = np.atleast_2d(np.asarray(v, dtype=float))
        out = np.asarray(self.func(s, v), dtype=float)
        if out.shape != (len(s), len(v)):
            raise DimensionMismatch("kernel must return an (n, m) matrix")
        if not np.all(np.isfinite(out)):
            raise InputError("kernel values must be finite")
        return out

    @classmethod
    def zero(cls):
        return cls(lambda s, v: np.zeros((len(s), len(v))), "zero")

    @classmethod
    def local_average(cls, beta, grid):
        """beta / |A(s)| on the cell A(s) containing s, zero elsewhere."""
        beta = float(beta)

        def func(s, v):
            cs, cv = grid.locate(s), grid.locate(v)
            same = (cs[:, None] == cv[None, :]) & (cs[:, None] >= 0)
            vol = grid.volumes[np.maximum(cs, 0)]
            return np.where(same, beta / vol[:, None], 0.0)

        return cls(func, "local_average")

    @classmethod
    def gaussian(cls, amplitude, scale, shift=None):
        """amplitude * exp(-|s - v - shift|^2 / scale); asymmetric when shift != 0."""
        amplitude, scale = float(amplitude), float(scale)
        if scale <= 0:
            raise InputError("kernel scale must be positive")

        def func(s, v):
            h = np.zeros(s.shape[1]) if shift is None else np.asarray(shift, dtype=float)
            return amplitude * np.exp(-cdist(s - h, v, "sqeuclidean") / scale)

        return cls(func, "gaussian")


def _mean_values(mean, locations):
    """Constant mean, or coefficients (b0, b1, ..., bd) of b0 + b . s, or a callable."""
    loc = np.atleast_2d(locations)
    if callable(mean):
        return np.asarray(mean(loc), dtype=float).reshape(len(loc))
    coef = np.atleast_1d(np.asarray(mean, dtype=float))
    if coef.size == 1:
        return np.full(len(loc), float(coef[0]))
    if coef.size != loc.shape[1] + 1:
        raise DimensionMismatch("linear mean needs one intercept plus one slope per coordinate")
    return coef[0] + loc @ coef[1:]


@dataclass(frozen=True, eq=False)
class BivariateModel:
    mean1: object
    mean2: object
    cov11: object
    cov2given1: object
    kernel: InteractionKernel
    grid: object

    def __post_init__(self):
        if min(self.grid.shape) < 4:
            raise GridTooCoarse("the integration grid needs at least 4 cells per axis")


@dataclass(frozen=True, eq=False)
class CrossCovarianceSet:
    c11: np.ndarray
    c12: np.ndarray
    c21: np.ndarray
    c22: np.ndarray

    @property
    def n(self):
        return self.c11.shape[0]

    def to_csv(self, directory):
        """Write c11.csv ... c22.csv and a manifest naming each block."""
        from .gridio import fmt

        names = {"c11": "cov(Y1(s), Y1(u))", "c12": "cov(Y1(s), Y2(u))",
                 "c21": "cov(Y2(s), Y1(u))", "c22": "cov(Y2(s), Y2(u))"}
        for key in names:
            mat = getattr(self, key)
            with open(os.path.join(directory, f"{key}.csv"), "w", encoding="utf-8", newline="\n") as fh:
                for row in mat:
                    fh.write(",".join(fmt(v) for v in row) + "\n")
        with open(os.path.join(directory, "manifest.txt"), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(f"locations: {self.n}\n")
            for key, desc in names.items():
                fh.write(f"{key}.csv: {desc}\n")


def _blocks(model, loc):
    grid = model.grid
    weighted_b = model.kernel(loc, grid.centroids) * grid.volumes[None, :]
    k1v = cross_covariance(model.cov11, loc, grid.centroids)
    kvv = cross_covariance(model.cov11, grid.centroids, grid.centroids)
    c11 = _gram(model.cov11, loc)
    c12 = k1v @ weighted_b.T
    c21 = weighted_b @ k1v.T
    c22 = _gram(model.cov2given1, loc) + weighted_b @ kvv @ weighted_b.T
    return CrossCovarianceSet(c11, c12, c21, 0.5 * (c22 + c22.T))


def derive_cross_covariances(model, locations):
    """Evaluate all four covariance blocks on a common set of distinct locations.

    C12(s, u) = sum_j C11(s, v_j) b(u, v_j) |A_j|
    C21(s, u) = sum_j b(s, v_j) C11(v_j, u) |A_j|
    C22(s, u) = C_{2|1}(s, u) + sum_jk b(s, v_j) C11(v_j, v_k) b(u, v_k) |A_j| |A_k|

    The nugget of C11 enters only the C11 block: integrals see the continuous
    part of the first field.
    """
    loc = as_locations(locations)
    check_distinct(loc)
    return _blocks(model, loc)


def joint_covariance_matrix(ccset):
    """Symmetric 2n x 2n covariance of (Y1, Y2) at the location set.

    Negative eigenvalues down to -1e-8 times the largest variance (quadrature
    round-off) are lifted by a diagonal shift; anything lower is an error.
    """
    joint = np.block([[ccset.c11, ccset.c12], [ccset.c21, ccset.c22]])
    joint = 0.5 * (joint + joint.T)
    scale = float(np.max(np.diag(joint))) if joint.size else 0.0
    min_eig = float(np.linalg.eigvalsh(joint)[0]) if joint.size else 0.0
    if min_eig < -EIGEN_FLOOR * max(scale, 0.0):
        raise NotPositiveDefinite(
            f"joint covariance has minimum eigenvalue {min_eig:.6g}", min_eig)
    if min_eig < 0:
        joint = joint + (-min_eig) * np.eye(len(joint))
    return joint


@dataclass(frozen=True)
class CokrigingResult:
    prediction: np.ndarray
    variance: np.ndarray

    @property
    def standard_error(self):
        return np.sqrt(self.variance)


def cokrige(model, data1, data2, target, s0, noise=0.0):
    """Predict Y1 or Y2 at ``s0`` from data on both variables.

    Parameters
    ----------
    data1, data2 : SpatialDataset or None
        Observations of each variable; either may be omitted.
    target : {1, 2}
    s0 : array_like, one site or an (m, d) array of sites
    noise : float or pair of floats
        Measurement-error variance for the first and second variable.
    """
    if target not in (1, 2):
        raise InputError("target must be 1 or 2")
    sites = np.atleast_2d(np.asarray(s0, dtype=float))
    parts = [d for d in (data1, data2) if d is not None]
    dim = parts[0].dim if parts else sites.shape[1]
    if sites.shape[1] != dim:
        raise DimensionMismatch("prediction sites have the wrong dimension")
    empty = np.empty((0, dim))
    loc1 = data1.locations if data1 is not None else empty
    loc2 = data2.locations if data2 is not None else empty
    z1 = data1.values if data1 is not None else np.empty(0)
    z2 = data2.values if data2 is not None else np.empty(0)
    noise = np.broadcast_to(np.asarray(noise, dtype=float), (2,))
    n1, n2, m = len(loc1), len(loc2), len(sites)
    # each row is its own process site, so co-located rows share only the continuous part
    rows = np.vstack([loc1, loc2, sites])
    blocks = _blocks(model, rows)
    joint = np.block([[blocks.c11, blocks.c12], [blocks.c21, blocks.c22]])
    joint = 0.5 * (joint + joint.T)
    total = len(rows)
    obs = np.concatenate([np.arange(n1), total + n1 + np.arange(n2)])
    tgt = (target - 1) * total + n1 + n2 + np.arange(m)
    keep = np.concatenate([obs, tgt])
    mean = np.concatenate([_mean_values(model.mean1, rows), _mean_values(model.mean2, rows)])
    spec = GaussianSpec._trusted(mean[keep], joint[np.ix_(keep, keep)])
    noise_obs = np.concatenate([np.full(n1, noise[0]), np.full(n2, noise[1])])
    try:
        cond = gaussian_condition(spec, np.arange(obs.size), np.concatenate([z1, z2]), noise_obs)
    except SingularCovariance as exc:
        raise SingularSystem(str(exc)) from None
    var = np.diag(cond.covariance).copy()
    scale = max(1.0, float(np.max(np.diag(spec.covariance))))
    if np.any(var < -1e-10 * scale):
        raise SingularSystem("negative cokriging variance")
    return CokrigingResult(cond.mean.copy(), np.maximum(var, 0.0))


__all__ = [
    "InteractionKernel",
    "BivariateModel",
    "CrossCovarianceSet",
    "CokrigingResult",
    "derive_cross_covariances",
    "joint_covariance_matrix",
    "cokrige",
]
