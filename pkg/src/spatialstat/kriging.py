"""Simple, ordinary and universal kriging, Gaussian MLE and prediction maps.

Measurement noise enters as an additive diagonal on the data covariance
block, and predictions target the noiseless process Y. The nugget is part
of Y: a prediction site gets variance sill + nugget but shares only the
continuous covariance with every datum, so kriging does not interpolate
exactly when the nugget is positive.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy import optimize
from scipy.spatial.distance import pdist, squareform

from . import gridio
from .core import as_locations, robust_cholesky
from .covariance import CovarianceModel, _gram, cross_covariance
from .errors import (
    DimensionMismatch,
    FitDiverged,
    InputError,
    RankDeficientTrend,
    SingularSystem,
    TooFewObservations,
)

_COORD = {"x": 0, "y": 1, "z": 2}


@dataclass(frozen=True)
class TrendSpec:
    """Mean basis x(s) for universal kriging.

    Each term is ``"1"``, a coordinate name (``"x"``, ``"y"``, ``"z"``) or a
    callable mapping an (n, d) location array to n values. The first term
    must be ``"1"``.
    """

    terms: tuple = ("1",)

    def __post_init__(self):
        terms = tuple(self.terms)
        if not terms or terms[0] != "1":
            raise InputError("trend: the first basis function must be the constant '1'")
        for t in terms[1:]:
            if not (callable(t) or t in _COORD or t == "1"):
                raise InputError(f"trend: unknown basis term {t!r}")
        object.__setattr__(self, "terms", terms)

    @classmethod
    def parse(cls, text):
        return cls(tuple(t.strip() for t in text.split(",") if t.strip()))

    @property
    def p(self):
        return len(self.terms)

    def evaluate(self, locations):
        loc = np.atleast_2d(np.asarray(locations, dtype=float))
        cols = []
        for t in self.terms:
            if t == "1":
                cols.append(np.ones(len(loc)))
            elif callable(t):
                cols.append(np.asarray(t(loc), dtype=float).reshape(len(loc)))
            else:
                axis = _COORD[t]
                if axis >= loc.shape[1]:
                    raise DimensionMismatch(f"trend term {t!r} needs {axis + 1}-d locations")
                cols.append(loc[:, axis])
        x = np.column_stack(cols)
        if not np.all(np.isfinite(x)):
            raise InputError("trend basis evaluated to non-finite values")
        return x


ORDINARY = TrendSpec(("1",))


@dataclass(frozen=True, eq=False)
class KrigingResult:
    predictor: float
    kriging_variance: float
    weights: np.ndarray

    @property
    def standard_error(self):
        return float(np.sqrt(self.kriging_variance))


def _clamp_variance(var, scale):
    tol = 1e-10 * max(1.0, scale)
    if np.any(var < -tol):
        raise SingularSystem(f"negative kriging variance {float(np.min(var)):.3e}")
    return np.maximum(var, 0.0)


class KrigingSystem:
    """Factorised data covariance, reusable across many prediction sites.

    With ``design`` set, predictions are universal-kriging BLUPs under the
    unbiasedness constraints X' lambda = x(s0); without it they are simple
    kriging predictors with a known mean.
    """

    def __init__(self, locations, values, model, measurement_noise=0.0, design=None):
        self.locations = as_locations(locations)
        self.values = np.asarray(values, dtype=float)
        self.model = model
        noise = np.broadcast_to(np.asarray(measurement_noise, dtype=float), self.values.shape)
        if np.any(noise < 0):
            raise InputError("measurement noise must be non-negative")
        k = _gram(model, self.locations) + np.diag(noise)
        try:
            self.chol = robust_cholesky(k)
        except np.linalg.LinAlgError:
            raise SingularSystem("data covariance matrix is singular") from None
        self.design = None
        if design is not None:
            x = np.asarray(design, dtype=float)
            if x.ndim != 2 or x.shape[0] != len(self.values):
                raise DimensionMismatch("design matrix must have one row per datum")
            if x.shape[1] > x.shape[0] or np.linalg.matrix_rank(x) < x.shape[1]:
                raise RankDeficientTrend("trend design matrix is not of full column rank")
            self.design = x
            self.kinv_x = self._solve(x)
            gls = x.T @ self.kinv_x
            try:
                self.gls_chol = sla.cholesky(gls, lower=True)
            except np.linalg.LinAlgError:
                raise RankDeficientTrend("trend design is numerically rank deficient") from None

    def _solve(self, b):
        return sla.cho_solve((self.chol, True), b, check_finite=False)

    def gls_coefficients(self):
        kinv_z = self._solve(self.values)
        return sla.cho_solve((self.gls_chol, True), self.design.T @ kinv_z)

    def predict(self, sites, x0=None, mean0=None, data_mean=None):
        """Predictor, kriging variance and weights (n x m) at ``sites``."""
        s0 = np.atleast_2d(np.asarray(sites, dtype=float))
        k0 = cross_covariance(self.model, self.locations, s0)
        kinv_k0 = self._solve(k0)
        var = self.model.total_variance - np.einsum("ij,ij->j", k0, kinv_k0)
        if self.design is None:
            lam = kinv_k0
            mu0 = np.zeros(len(s0)) if mean0 is None else np.asarray(mean0, dtype=float)
            mu = np.zeros(len(self.values)) if data_mean is None else np.asarray(data_mean, dtype=float)
            pred = mu0 + lam.T @ (self.values - mu)
        else:
            x0 = np.atleast_2d(np.asarray(x0, dtype=float))
            r = x0.T - self.design.T @ kinv_k0
            a = sla.cho_solve((self.gls_chol, True), r)
            lam = kinv_k0 + self.kinv_x @ a
            pred = lam.T @ self.values
            var = var + np.einsum("ij,ij->j", r, a)
        var = _clamp_variance(var, self.model.total_variance)
        return pred, var, lam


def _mean_at(known_mean, locations):
    if callable(known_mean):
        return np.asarray(known_mean(np.atleast_2d(locations)), dtype=float).reshape(len(np.atleast_2d(locations)))
    return np.full(len(np.atleast_2d(locations)), float(known_mean))


def _site(dataset, s0):
    s0 = np.atleast_1d(np.asarray(s0, dtype=float))
    if s0.shape != (dataset.dim,):
        raise DimensionMismatch(f"prediction site must have {dataset.dim} coordinates")
    return s0[None, :]


def simple_kriging(dataset, model, known_mean=0.0, s0=None, measurement_noise=0.0):
    """Kriging with a known mean function (constant or callable).

    Equals the conditional mean and variance of Y(s0) given the data under
    joint Gaussianity.
    """
    site = _site(dataset, s0)
    system = KrigingSystem(dataset.locations, dataset.values, model, measurement_noise)
    pred, var, lam = system.predict(site, mean0=_mean_at(known_mean, site),
                                    data_mean=_mean_at(known_mean, dataset.locations))
    return KrigingResult(float(pred[0]), float(var[0]), lam[:, 0])


def _design(dataset, trend, site, x0):
    if trend is not None:
        return trend.evaluate(dataset.locations), trend.evaluate(site)
    if dataset.covariates is not None:
        if x0 is None:
            raise InputError("x0 (covariates at the prediction site) is required with dataset covariates")
        return dataset.covariates, np.atleast_2d(np.asarray(x0, dtype=float))
    return ORDINARY.evaluate(dataset.locations), ORDINARY.evaluate(site)


def universal_kriging(dataset, model, trend=None, s0=None, measurement_noise=0.0, x0=None):
    """BLUP under the mean x(s)'beta with unknown beta.

    ``trend`` gives the basis; if omitted, the dataset's covariate matrix is
    used (with ``x0`` the covariates at the prediction site), and failing
    that, a constant mean.
    """
    site = _site(dataset, s0)
    x, x_site = _design(dataset, trend, site, x0)
    system = KrigingSystem(dataset.locations, dataset.values, model, measurement_noise, design=x)
    pred, var, lam = system.predict(site, x0=x_site)
    return KrigingResult(float(pred[0]), float(var[0]), lam[:, 0])


def ordinary_kriging(dataset, model, s0=None, measurement_noise=0.0):
    """Kriging with an unknown constant mean; weights sum to one."""
    return universal_kriging(dataset, model, ORDINARY, s0, measurement_noise)


# ---------------------------------------------------------------------------
# maximum likelihood
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MleFit:
    model: CovarianceModel
    beta: np.ndarray
    loglik: float
    converged: bool


def _profile_loglik(dataset, x, family, smoothness, rng_, ratio, dists):
    n = dataset.n
    tmp = CovarianceModel(family, 1.0, rng_, 0.0, smoothness)
    r = squareform((1.0 - ratio) * tmp.correlation(dists))
    np.fill_diagonal(r, 1.0)
    try:
        chol = sla.cholesky(r, lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        return -np.inf, None, None
    rinv_x = sla.cho_solve((chol, True), x, check_finite=False)
    rinv_z = sla.cho_solve((chol, True), dataset.values, check_finite=False)
    try:
        beta = np.linalg.solve(x.T @ rinv_x, x.T @ rinv_z)
    except np.linalg.LinAlgError:
        return -np.inf, None, None
    resid = dataset.values - x @ beta
    quad = float(resid @ sla.cho_solve((chol, True), resid, check_finite=False))
    sigma2 = quad / n
    if not sigma2 > 0:
        return -np.inf, None, None
    ll = -0.5 * n * (np.log(2 * np.pi * sigma2) + 1.0) - np.log(np.diag(chol)).sum()
    return float(ll), beta, sigma2


def fit_mle(dataset, family, trend=None, smoothness=None, n_starts=5, maxiter=500, tol=1e-8):
    """Gaussian maximum likelihood for (sill, range, nugget), beta by GLS.

    The total variance and beta are profiled out in closed form, leaving a
    two-parameter search over log range and the logit of the nugget share,
    run with Nelder-Mead from ``n_starts`` starting points.

    Returns
    -------
    MleFit
        Fitted model, GLS coefficients, maximised log-likelihood and whether
        the best start reported convergence.
    """
    if trend is None and dataset.covariates is not None:
        x = dataset.covariates
    else:
        x = (trend or ORDINARY).evaluate(dataset.locations)
    p = x.shape[1]
    if dataset.n < p + 2:
        raise TooFewObservations(f"need at least {p + 2} observations for {p} trend terms")
    if np.linalg.matrix_rank(x) < p:
        raise RankDeficientTrend("trend design matrix is not of full column rank")
    dists = pdist(dataset.locations)
    dmax = float(dists.max())
    lo = np.array([np.log(1e-3 * dmax), -30.0])
    hi = np.array([np.log(10.0 * dmax), 12.0])

    def unpack(theta):
        t = np.clip(theta, lo, hi)
        return float(np.exp(t[0])), float(1.0 / (1.0 + np.exp(-t[1])))

    def objective(theta):
        rng_, ratio = unpack(theta)
        ll = _profile_loglik(dataset, x, family, smoothness, rng_, ratio, dists)[0]
        return -ll if np.isfinite(ll) else 1e300

    fracs = np.geomspace(0.02, 0.5, n_starts)
    starts = [np.array([np.log(f * dmax), np.log(0.1 / 0.9)]) for f in fracs]
    best = None
    for x0 in starts:
        res = optimize.minimize(objective, x0, method="Nelder-Mead", bounds=list(zip(lo, hi)),
                                options=dict(maxiter=maxiter, xatol=tol, fatol=tol))
        if res.fun < 1e300 and (best is None or res.fun < best.fun):
            best = res
    if best is None:
        raise FitDiverged("likelihood could not be evaluated from any start")
    rng_, ratio = unpack(best.x)
    ll, beta, sigma2 = _profile_loglik(dataset, x, family, smoothness, rng_, ratio, dists)
    model = CovarianceModel(family, (1.0 - ratio) * sigma2, rng_, ratio * sigma2, smoothness)
    return MleFit(model, beta, ll, bool(best.success))


# ---------------------------------------------------------------------------
# prediction maps
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PredictionMap:
    grid: object
    predictions: np.ndarray
    standard_errors: np.ndarray

    def to_csv(self, path):
        c = self.grid.centroids
        rows = ((c[k, 0], c[k, 1], self.predictions[k], self.standard_errors[k]) for k in range(len(c)))
        gridio.write_csv(path, ["cell_x", "cell_y", "prediction", "standard_error"],
                         ([float(v) for v in r] for r in rows))

    def as_array(self, which="prediction"):
        vals = self.predictions if which == "prediction" else self.standard_errors
        return gridio.cells_to_array(self.grid.shape, self.grid.index, vals)

    def to_raster(self, path, which="prediction"):
        size = self.grid.cell_size
        if not np.isclose(size[0], size[1], rtol=1e-12, atol=0.0):
            raise InputError("raster output needs square cells")
        lo = self.grid.window.lower
        gridio.write_ascii_grid(path, self.as_array(which), lo[0], lo[1], size[0])


def kriging_map(dataset, model, trend=None, grid=None, measurement_noise=0.0, chunk=4096):
    """Universal kriging at every cell centroid of ``grid``.

    Cells are independent; they are evaluated in chunks against a single
    factorisation of the data covariance.
    """
    trend = trend or ORDINARY
    system = KrigingSystem(dataset.locations, dataset.values, model, measurement_noise,
                           design=trend.evaluate(dataset.locations))
    cent = grid.centroids
    preds = np.empty(len(cent))
    ses = np.empty(len(cent))
    for start in range(0, len(cent), chunk):
        block = cent[start:start + chunk]
        pred, var, _ = system.predict(block, x0=trend.evaluate(block))
        preds[start:start + chunk] = pred
        ses[start:start + chunk] = np.sqrt(var)
    return PredictionMap(grid, preds, ses)


__all__ = [
    "TrendSpec",
    "KrigingResult",
    "KrigingSystem",
    "PredictionMap",
    "MleFit",
    "simple_kriging",
    "ordinary_kriging",
    "universal_kriging",
    "fit_mle",
    "kriging_map",
]
