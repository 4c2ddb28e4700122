"""Poisson, log-Gaussian Cox and marked point processes on bounded windows."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.spatial.distance import pdist

from ._accel import kernels
from .core import Window, robust_cholesky, tessellate_baus
from .covariance import _gram
from .errors import (
    DimensionMismatch,
    InputError,
    NegativeIntensity,
    RadiusTooLarge,
    RegionOutsideWindow,
    TooFewPoints,
    TooFewSimulations,
    UnboundedIntensity,
)


@dataclass(frozen=True, eq=False)
class PointPattern:
    """A realisation {N, (s_1, Z(s_1)), ..., (s_N, Z(s_N))} on a window."""

    window: Window
    points: np.ndarray
    marks: Optional[np.ndarray] = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, self.window.dim)
        if len(pts) and not np.all(self.window.contains(pts, tol=1e-12)):
            raise InputError("all points must lie inside the window")
        if self.marks is not None:
            marks = np.asarray(self.marks, dtype=float).ravel()
            if marks.size != len(pts):
                raise DimensionMismatch("one mark per point is required")
            object.__setattr__(self, "marks", marks)
        object.__setattr__(self, "points", pts)

    @property
    def n(self):
        return len(self.points)

    def with_marks(self, marks):
        return PointPattern(self.window, self.points, marks)

    def without_marks(self):
        return PointPattern(self.window, self.points, None)

    def to_csv(self, path):
        from .gridio import fmt

        lo, hi = self.window.lower, self.window.upper
        lines = [f"# window: {fmt(lo[0])} {fmt(lo[1])} {fmt(hi[0])} {fmt(hi[1])}"]
        lines.append("x,y,mark" if self.marks is not None else "x,y")
        for k in range(self.n):
            row = [fmt(v) for v in self.points[k]]
            if self.marks is not None:
                row.append(fmt(self.marks[k]))
            lines.append(",".join(row))
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")


def read_pattern_csv(path):
    """Read a pattern written by :meth:`PointPattern.to_csv` (box windows)."""
    with open(path, encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or not lines[0].startswith("# window:"):
        raise InputError(f"{path}: first line must be '# window: x0 y0 x1 y1'")
    x0, y0, x1, y1 = (float(v) for v in lines[0].split(":", 1)[1].split())
    header = lines[1].split(",")
    rows = np.array([[float(v) for v in ln.split(",")] for ln in lines[2:]]).reshape(-1, len(header))
    marks = rows[:, 2] if "mark" in header else None
    return PointPattern(Window.box([x0, y0], [x1, y1]), rows[:, :2], marks)


@dataclass(frozen=True, eq=False)
class IntensityFunction:
    """Non-negative intensity lambda(s) with a known upper bound ``lam_max``.

    Use :meth:`constant`, :meth:`gridded` or :meth:`from_callable`.
    """

    kind: str
    lam_max: float
    value: float = 0.0
    grid: object = None
    cell_values: Optional[np.ndarray] = None
    func: Optional[Callable] = None

    @classmethod
    def constant(cls, lam):
        lam = float(lam)
        if lam < 0:
            raise NegativeIntensity("intensity must be non-negative")
        return cls("constant", lam, value=lam)

    @classmethod
    def gridded(cls, grid, values):
        vals = np.asarray(values, dtype=float).ravel()
        if vals.size != grid.n_cells:
            raise DimensionMismatch("one intensity value per grid cell is required")
        if np.any(vals < 0):
            raise NegativeIntensity("intensity must be non-negative")
        if not np.all(np.isfinite(vals)):
            raise UnboundedIntensity("gridded intensity must be finite")
        return cls("grid", float(vals.max(initial=0.0)), grid=grid, cell_values=vals)

    @classmethod
    def from_callable(cls, func, lam_max):
        lam_max = float(lam_max)
        if not np.isfinite(lam_max):
            raise UnboundedIntensity("lam_max must be finite")
        if lam_max < 0:
            raise NegativeIntensity("lam_max must be non-negative")
        return cls("callable", lam_max, func=func)

    def __call__(self, points):
        p = np.atleast_2d(np.asarray(points, dtype=float))
        if self.kind == "constant":
            return np.full(len(p), self.value)
        if self.kind == "grid":
            cell = self.grid.locate(p)
            return np.where(cell >= 0, self.cell_values[np.maximum(cell, 0)], 0.0)
        vals = np.asarray(self.func(p), dtype=float).reshape(len(p))
        if np.any(vals < 0):
            raise NegativeIntensity("intensity function returned negative values")
        if np.any(vals > self.lam_max * (1 + 1e-12)):
            raise UnboundedIntensity("intensity exceeds its declared upper bound lam_max")
        return vals


def simulate_homogeneous_poisson(window, lam, seed=None):
    """N ~ Poisson(lam |W|), then N i.i.d. uniform points on the window."""
    lam = float(lam)
    if lam < 0:
        raise NegativeIntensity("intensity must be non-negative")
    rng = np.random.default_rng(seed)
    n = rng.poisson(lam * window.volume)
    return PointPattern(window, window.sample_uniform(rng, n))


def simulate_inhomogeneous_poisson(window, intensity, seed=None):
    """Lewis-Shedler thinning of a homogeneous process at rate ``lam_max``."""
    if not np.isfinite(intensity.lam_max):
        raise UnboundedIntensity("intensity needs a finite upper bound")
    rng = np.random.default_rng(seed)
    n = rng.poisson(intensity.lam_max * window.volume)
    cand = window.sample_uniform(rng, n)
    if n == 0 or intensity.lam_max == 0:
        return PointPattern(window, np.empty((0, window.dim)))
    keep = rng.random(n) * intensity.lam_max < intensity(cand)
    return PointPattern(window, cand[keep])


def _sample_in_cell(grid, k, rng, count):
    lo, hi = grid.lower[k], grid.upper[k]
    if grid.polygons is None:
        return lo + rng.random((count, len(lo))) * (hi - lo)
    cell = Window.polygon(grid.polygons[k])
    return cell.sample_uniform(rng, count)


def simulate_lgcp(window, grid, gp_mean, model, seed=None):
    """Log-Gaussian Cox process with log-intensity piecewise constant on BAUs.

    Draws log lambda at the cell centroids from a Gaussian process with mean
    ``gp_mean`` (scalar or per-cell array) and covariance ``model``, then a
    Poisson count per cell placed uniformly within the cell.

    Returns
    -------
    pattern : PointPattern
    log_intensity : ndarray, one value per cell
    """
    rng = np.random.default_rng(seed)
    mean = np.broadcast_to(np.asarray(gp_mean, dtype=float), (grid.n_cells,))
    chol = robust_cholesky(_gram(model, grid.centroids))
    field = mean + chol @ rng.standard_normal(grid.n_cells)
    counts = rng.poisson(np.exp(field) * grid.volumes)
    pts = [_sample_in_cell(grid, k, rng, c) for k, c in enumerate(counts) if c > 0]
    points = np.vstack(pts) if pts else np.empty((0, window.dim))
    return PointPattern(window, points), field


def count(pattern, region):
    """Number of points in a closed ``region`` contained in the pattern's window."""
    if not pattern.window.contains_window(region):
        raise RegionOutsideWindow("region must lie inside the pattern window")
    if pattern.n == 0:
        return 0
    return int(np.count_nonzero(region.contains(pattern.points, tol=0.0)))


def _check_radii(window, radii):
    r = np.atleast_1d(np.asarray(radii, dtype=float))
    if r.size == 0 or np.any(r <= 0) or np.any(np.diff(r) <= 0):
        raise InputError("radii must be positive and strictly increasing")
    limit = 0.25 * float(np.min(window.side_lengths))
    if r[-1] > limit * (1 + 1e-12):
        raise RadiusTooLarge(f"largest radius {r[-1]} exceeds a quarter of the shorter side ({limit})")
    return r


def estimate_k_function(pattern, radii):
    """Translation-corrected estimate of Ripley's K at each radius.

    K(r) = |W| / (N (N - 1)) * sum_{i != j} 1{|s_i - s_j| <= r} |W| / |W cap (W + s_i - s_j)|
    """
    if pattern.n < 2:
        raise TooFewPoints("the K-function needs at least two points")
    r = _check_radii(pattern.window, radii)
    return _k_values(pattern.window, pattern.points, r)


def _k_values(window, pts, r):
    n = len(pts)
    area = window.volume
    if window.kind == "box" and window.dim == 2:
        w, h = window.side_lengths
        sums = kernels.translation_pair_sums(np.ascontiguousarray(pts), r, float(w), float(h))
    else:
        i, j = np.triu_indices(n, k=1)
        d = pdist(pts)
        keep = d <= r[-1]
        shifts = pts[i[keep]] - pts[j[keep]]
        wts = np.array([2.0 / window.overlap_area(s) for s in shifts])
        bins = np.searchsorted(r, d[keep], side="left")
        sums = np.cumsum(np.bincount(bins, weights=wts, minlength=r.size))
    return area * area * sums / (n * (n - 1))


def default_radii(window, n_radii=10):
    limit = 0.25 * float(np.min(window.side_lengths))
    return np.linspace(limit / n_radii, limit, n_radii)


def _k_deviation(window, pts, r):
    k = _k_values(window, pts, r)
    return float(np.max(np.abs(np.sqrt(k / np.pi) - r)))


def _quadrat_chi2(window, pts, grid):
    cells = grid.locate(pts)
    observed = np.bincount(cells[cells >= 0], minlength=grid.n_cells)
    expected = len(pts) * grid.volumes / grid.volumes.sum()
    return float(np.sum((observed - expected) ** 2 / expected))


@dataclass(frozen=True)
class CsrTestResult:
    statistic: float
    p_value: float
    n_sim: int
    seed: object
    statistic_name: str

    def report(self):
        return (f"statistic: {self.statistic_name}\n"
                f"value: {self.statistic:.12g}\n"
                f"p_value: {self.p_value:.12g}\n"
                f"n_sim: {self.n_sim}\n"
                f"seed: {self.seed}\n")


def csr_test(pattern, n_sim=99, seed=None, statistic="k-deviation", radii=None, quadrats=4):
    """Monte Carlo test of complete spatial randomness, conditional on N.

    Simulations are binomial processes with the observed number of points, so
    the unknown intensity drops out. ``statistic`` is ``'k-deviation'``
    (sup over radii of |sqrt(K(r)/pi) - r|) or ``'quadrat-chi2'`` (Pearson
    statistic on a quadrats x quadrats grid).

    p = (1 + #{simulated >= observed}) / (n_sim + 1).
    """
    if pattern.n < 5:
        raise TooFewPoints("the CSR test needs at least five points")
    n_sim = int(n_sim)
    if n_sim < 39:
        raise TooFewSimulations("n_sim must be at least 39")
    window = pattern.window
    if statistic == "k-deviation":
        r = default_radii(window) if radii is None else _check_radii(window, radii)

        def stat(pts):
            return _k_deviation(window, pts, r)
    elif statistic == "quadrat-chi2":
        grid = tessellate_baus(window, quadrats)

        def stat(pts):
            return _quadrat_chi2(window, pts, grid)
    else:
        raise InputError(f"unknown CSR statistic {statistic!r}")
    rng = np.random.default_rng(seed)
    observed = stat(pattern.points)
    sims = np.array([stat(window.sample_uniform(rng, pattern.n)) for _ in range(n_sim)])
    p = (1 + int(np.count_nonzero(sims >= observed))) / (n_sim + 1)
    return CsrTestResult(observed, p, n_sim, seed, statistic)


__all__ = [
    "PointPattern",
    "IntensityFunction",
    "CsrTestResult",
    "simulate_homogeneous_poisson",
    "simulate_inhomogeneous_poisson",
    "simulate_lgcp",
    "count",
    "estimate_k_function",
    "csr_test",
    "read_pattern_csv",
]
