"""Stationary isotropic covariance families, variograms and Gram matrices."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import optimize, special
from scipy.spatial.distance import cdist, pdist, squareform

from .core import as_locations, check_distinct
from .errors import (
    FitDiverged,
    InputError,
    InsufficientData,
    InvalidParameter,
    NegativeDistance,
    TooFewBins,
)

FAMILIES = ("exponential", "gaussian", "spherical", "matern")


@dataclass(frozen=True)
class CovarianceModel:
    """Isotropic stationary covariance C(h) = nugget*1{h=0} + sill*rho(h/range).

    Parameters
    ----------
    family : {'exponential', 'gaussian', 'spherical', 'matern'}
    sill : float
        Partial sill of the continuous component, > 0.
    range : float
        Scale parameter, > 0. For the spherical family it is the support radius.
    nugget : float
        Micro-scale variance at h = 0, >= 0.
    smoothness : float, optional
        Matern smoothness nu > 0; required for, and only for, the Matern family.
    """

    family: str
    sill: float
    range: float
    nugget: float = 0.0
    smoothness: Optional[float] = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidParameter(f"family: unknown covariance family {self.family!r}")
        if not (np.isfinite(self.sill) and self.sill > 0):
            raise InvalidParameter("sill must be strictly positive")
        if not (np.isfinite(self.range) and self.range > 0):
            raise InvalidParameter("range must be strictly positive")
        if not (np.isfinite(self.nugget) and self.nugget >= 0):
            raise InvalidParameter("nugget must be non-negative")
        if self.family == "matern":
            if self.smoothness is None or not (np.isfinite(self.smoothness) and self.smoothness > 0):
                raise InvalidParameter("smoothness must be strictly positive for the matern family")
        elif self.smoothness is not None:
            raise InvalidParameter(f"smoothness is not a parameter of the {self.family} family")

    @property
    def total_variance(self):
        return self.sill + self.nugget

    def with_params(self, **kw):
        params = dict(family=self.family, sill=self.sill, range=self.range,
                      nugget=self.nugget, smoothness=self.smoothness)
        params.update(kw)
        return CovarianceModel(**params)

    def correlation(self, h):
        """Continuous-part correlation rho(h) for h >= 0 (array-valued)."""
        h = np.asarray(h, dtype=float)
        t = h / self.range
        if self.family == "exponential":
            return np.exp(-t)
        if self.family == "gaussian":
            return np.exp(-t * t)
        if self.family == "spherical":
            return np.where(t < 1.0, 1.0 - 1.5 * t + 0.5 * t ** 3, 0.0)
        nu = self.smoothness
        with np.errstate(invalid="ignore", over="ignore"):
            r = (2.0 ** (1.0 - nu) / special.gamma(nu)) * t ** nu * special.kv(nu, t)
        r = np.where(t > 0, r, 1.0)
        # kv underflows to 0 at large t which is the right limit
        return np.nan_to_num(r, nan=0.0)

    def continuous(self, h):
        """Covariance without the nugget; the limit C(0+) at h = 0."""
        return self.sill * self.correlation(h)

    def covariance(self, h):
        h = np.asarray(h, dtype=float)
        return np.where(h == 0.0, self.sill + self.nugget, self.continuous(h))

    def semivariogram(self, h):
        h = np.asarray(h, dtype=float)
        return np.where(h == 0.0, 0.0, self.nugget + self.sill - self.continuous(h))


def _check_distance(h):
    h = float(h)
    if not h >= 0:
        raise NegativeDistance(f"distance must be non-negative, got {h}")
    return h


def covariance_at(model, h):
    """C(h) for a single distance h >= 0."""
    return float(model.covariance(_check_distance(h)))


def semivariogram_at(model, h):
    """gamma(h) = C(0) - C(h); zero at the origin."""
    return float(model.semivariogram(_check_distance(h)))


def gram_matrix(model, locations):
    """Covariance matrix of the process at distinct ``locations``.

    The nugget sits on the diagonal only.
    """
    loc = as_locations(locations)
    check_distinct(loc)
    return _gram(model, loc)


def _gram(model, loc):
    if len(loc) == 1:
        return np.array([[model.total_variance]])
    k = squareform(model.continuous(pdist(loc)))
    np.fill_diagonal(k, model.total_variance)
    return k


def cross_covariance(model, a, b):
    """Covariances between two location sets treated as distinct process sites.

    The nugget is excluded even where coordinates coincide: a prediction site
    is a separate random variable from a co-located datum.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    return model.continuous(cdist(a, b))


# ---------------------------------------------------------------------------
# empirical variogram
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class EmpiricalVariogram:
    """Binned method-of-moments semivariances; ``gamma`` is NaN in empty bins."""

    lags: np.ndarray
    counts: np.ndarray
    gamma: np.ndarray
    edges: np.ndarray

    @property
    def occupied(self):
        return self.counts > 0

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["lag", "count", "semivariance"])
            for h, c, g in zip(self.lags, self.counts, self.gamma):
                w.writerow([format_float(h), int(c), "" if not np.isfinite(g) else format_float(g)])


def format_float(x):
    return f"{float(x):.12g}"


def empirical_variogram(dataset, n_bins, max_lag):
    """Matheron estimator on ``n_bins`` equal-width lag bins over (0, max_lag].

    gamma_hat(h) = sum over pairs in the bin of (Z_i - Z_j)^2 / (2 N(h)).
    """
    if dataset.n < 2:
        raise InsufficientData("need at least two observations")
    if not max_lag > 0:
        raise InputError("max_lag must be positive")
    n_bins = int(n_bins)
    if n_bins < 1:
        raise InputError("n_bins must be at least 1")
    d = pdist(dataset.locations)
    z = dataset.values
    i, j = np.triu_indices(dataset.n, k=1)
    sq = (z[i] - z[j]) ** 2
    edges = np.linspace(0.0, float(max_lag), n_bins + 1)
    keep = d <= max_lag
    # right-closed bins (edges[k], edges[k+1]]
    b = np.clip(np.searchsorted(edges, d[keep], side="left") - 1, 0, n_bins - 1)
    counts = np.bincount(b, minlength=n_bins)
    sums = np.bincount(b, weights=sq[keep], minlength=n_bins)
    with np.errstate(invalid="ignore", divide="ignore"):
        gamma = np.where(counts > 0, sums / (2.0 * counts), np.nan)
    lags = 0.5 * (edges[:-1] + edges[1:])
    return EmpiricalVariogram(lags, counts, gamma, edges)


def fit_variogram(empirical, family, smoothness=None, n_starts=5, seed=0):
    """Weighted least-squares fit of a variogram model to binned semivariances.

    Minimises sum N(h) (gamma_hat(h) - gamma(h))^2 over (sill, range, nugget)
    with Nelder-Mead in log-parameter space, started from ``n_starts`` points.
    """
    occ = empirical.occupied
    if occ.sum() < 3:
        raise TooFewBins(f"need at least 3 occupied bins, got {int(occ.sum())}")
    h, g, w = empirical.lags[occ], empirical.gamma[occ], empirical.counts[occ].astype(float)
    gmax = float(np.max(g))
    hmax = float(np.max(empirical.edges))
    lo = np.log([1e-10 * max(gmax, 1.0), 1e-3 * hmax, 1e-12 * max(gmax, 1.0)])
    hi = np.log([1e3 * max(gmax, 1e-8), 1e2 * hmax, 1e3 * max(gmax, 1e-8)])

    def model_of(theta):
        s, r, t = np.exp(np.clip(theta, lo, hi))
        return CovarianceModel(family, s, r, t, smoothness)

    def loss(theta):
        m = model_of(theta)
        return float(np.sum(w * (g - m.semivariogram(h)) ** 2))

    rng = np.random.default_rng(seed)
    base = np.log([max(gmax, 1e-8), hmax / 3.0, max(1e-3 * gmax, 1e-10)])
    starts = [base] + [base + rng.normal(0.0, 1.0, 3) for _ in range(n_starts - 1)]
    best = None
    for x0 in starts:
        res = optimize.minimize(loss, np.clip(x0, lo, hi), method="Nelder-Mead",
                                bounds=list(zip(lo, hi)),
                                options=dict(maxiter=2000, xatol=1e-10, fatol=1e-14))
        if np.isfinite(res.fun) and (best is None or res.fun < best.fun):
            best = res
    if best is None:
        raise FitDiverged("variogram fit failed from every start")
    return model_of(best.x)


__all__ = [
    "CovarianceModel",
    "EmpiricalVariogram",
    "covariance_at",
    "semivariogram_at",
    "gram_matrix",
    "cross_covariance",
    "empirical_variogram",
    "fit_variogram",
]
