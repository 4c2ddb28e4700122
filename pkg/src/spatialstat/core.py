"""Domain geometry, datasets, basic areal units and Gaussian conditioning.

The Gaussian conditioning routine in this module is deliberately plain
(dense Cholesky on the observed block). Every other module can be checked
against it.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as sla
from scipy.spatial import cKDTree

from .errors import (
    DimensionMismatch,
    DuplicateLocation,
    EmptyDataset,
    InputError,
    InvalidWindow,
    SingularCovariance,
    ZeroResolution,
)

DUPLICATE_TOL = 1e-12
JITTER = 1e-10


# ---------------------------------------------------------------------------
# planar polygon helpers
# ---------------------------------------------------------------------------

def polygon_area(vertices):
    """Signed shoelace area; positive for counter-clockwise vertices."""
    v = np.asarray(vertices, dtype=float)
    if len(v) < 3:
        return 0.0
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def polygon_centroid(vertices):
    v = np.asarray(vertices, dtype=float)
    a = polygon_area(v)
    if a == 0.0:
        return v.mean(axis=0)
    x, y = v[:, 0], v[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    cx = np.sum((x + xn) * cross) / (6.0 * a)
    cy = np.sum((y + yn) * cross) / (6.0 * a)
    return np.array([cx, cy])


def clip_polygon(subject, clip):
    """Clip ``subject`` against the convex counter-clockwise polygon ``clip``.

    Sutherland-Hodgman. Returns the vertex array of the intersection
    (possibly empty).
    """
    out = [np.asarray(p, dtype=float) for p in subject]
    clip = np.asarray(clip, dtype=float)
    for k in range(len(clip)):
        if not out:
            break
        a, b = clip[k], clip[(k + 1) % len(clip)]
        edge = b - a
        inp, out = out, []

        def side(p):
            return edge[0] * (p[1] - a[1]) - edge[1] * (p[0] - a[0])

        prev = inp[-1]
        sp = side(prev)
        for cur in inp:
            sc = side(cur)
            if sc >= 0:
                if sp < 0:
                    t = sp / (sp - sc)
                    out.append(prev + t * (cur - prev))
                out.append(cur)
            elif sp >= 0:
                t = sp / (sp - sc)
                out.append(prev + t * (cur - prev))
            prev, sp = cur, sc
    return np.array(out).reshape(-1, 2)


# ---------------------------------------------------------------------------
# windows
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Window:
    """Bounded observation window: an axis-aligned box or a convex polygon.

    Build with :meth:`box`, :meth:`unit_square` or :meth:`polygon` rather
    than the raw constructor.
    """

    kind: str
    lower: np.ndarray
    upper: np.ndarray
    vertices: Optional[np.ndarray] = None

    @classmethod
    def box(cls, lower, upper):
        lo = np.atleast_1d(np.asarray(lower, dtype=float))
        hi = np.atleast_1d(np.asarray(upper, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1 or not 1 <= lo.size <= 3:
            raise InvalidWindow("box bounds must be two vectors of equal length 1..3")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise InvalidWindow("box bounds must be finite")
        if np.any(hi <= lo):
            raise InvalidWindow("box must have positive volume")
        return cls("box", lo, hi)

    @classmethod
    def unit_square(cls):
        return cls.box([0.0, 0.0], [1.0, 1.0])

    @classmethod
    def polygon(cls, vertices):
        v = np.asarray(vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise InvalidWindow("polygon needs at least three 2-d vertices")
        if not np.all(np.isfinite(v)):
            raise InvalidWindow("polygon vertices must be finite")
        if polygon_area(v) < 0:
            v = v[::-1].copy()
        if polygon_area(v) <= 0:
            raise InvalidWindow("polygon must have positive area")
        e = np.roll(v, -1, axis=0) - v
        cross = e[:, 0] * np.roll(e, -1, axis=0)[:, 1] - e[:, 1] * np.roll(e, -1, axis=0)[:, 0]
        if np.any(cross <= 0):
            raise InvalidWindow("polygon must be simple, convex and free of collinear vertices")
        return cls("polygon", v.min(axis=0), v.max(axis=0), v)

    @property
    def dim(self):
        return self.lower.size

    @property
    def volume(self):
        if self.kind == "polygon":
            return polygon_area(self.vertices)
        return float(np.prod(self.upper - self.lower))

    @property
    def side_lengths(self):
        return self.upper - self.lower

    def contains(self, points, tol=1e-12):
        """Closed membership test for an (n, d) array of points."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        inside = np.all((p >= self.lower - tol) & (p <= self.upper + tol), axis=1)
        if self.kind == "polygon":
            v = self.vertices
            for k in range(len(v)):
                a, b = v[k], v[(k + 1) % len(v)]
                cross = (b[0] - a[0]) * (p[:, 1] - a[1]) - (b[1] - a[1]) * (p[:, 0] - a[0])
                inside &= cross >= -tol * max(1.0, float(np.hypot(*(b - a))))
        return inside

    def outline(self):
        """Vertex ring of a 2-d window (counter-clockwise)."""
        if self.kind == "polygon":
            return self.vertices
        if self.dim != 2:
            raise InvalidWindow("outline is only defined for planar windows")
        (x0, y0), (x1, y1) = self.lower, self.upper
        return np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]])

    def contains_window(self, other, tol=1e-12):
        if other.dim != self.dim:
            return False
        if other.kind == "box" and other.dim != 2:
            corners = np.array(np.meshgrid(*zip(other.lower, other.upper))).reshape(other.dim, -1).T
        else:
            corners = other.outline()
        return bool(np.all(self.contains(corners, tol=tol)))

    def sample_uniform(self, rng, n):
        """Draw ``n`` points uniformly on the window (rejection for polygons)."""
        n = int(n)
        if self.kind == "box":
            return self.lower + rng.random((n, self.dim)) * (self.upper - self.lower)
        out = np.empty((0, 2))
        frac = self.volume / float(np.prod(self.upper - self.lower))
        while len(out) < n:
            need = n - len(out)
            m = int(np.ceil(need / frac * 1.2)) + 4
            cand = self.lower + rng.random((m, 2)) * (self.upper - self.lower)
            out = np.vstack([out, cand[self.contains(cand, tol=0.0)]])
        return out[:n]

    def overlap_area(self, shift):
        """Area of the window intersected with its translate by ``shift``."""
        shift = np.asarray(shift, dtype=float)
        if self.kind == "box":
            return float(np.prod(np.clip(self.side_lengths - np.abs(shift), 0.0, None)))
        moved = self.vertices + shift
        return max(polygon_area(clip_polygon(moved, self.vertices)), 0.0)

    def describe(self):
        if self.kind == "box":
            return " ".join(repr(float(x)) for x in np.concatenate([self.lower, self.upper]))
        return " ".join(repr(float(x)) for x in self.vertices.ravel())


# ---------------------------------------------------------------------------
# datasets
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SpatialDataset:
    locations: np.ndarray
    values: np.ndarray
    covariates: Optional[np.ndarray] = None

    @property
    def n(self):
        return len(self.values)

    @property
    def dim(self):
        return self.locations.shape[1]


def as_locations(locations):
    """Coerce input to a finite float array of shape (n, d)."""
    loc = np.asarray(locations, dtype=float)
    if loc.ndim == 1:
        loc = loc[:, None]
    if loc.ndim != 2:
        raise DimensionMismatch("locations must be a 2-d array of shape (n, d)")
    if loc.size and not 1 <= loc.shape[1] <= 3:
        raise DimensionMismatch("locations must have 1, 2 or 3 coordinates")
    if not np.all(np.isfinite(loc)):
        raise InputError("location coordinates must be finite")
    return loc


def find_duplicate(locations, tol=DUPLICATE_TOL):
    """Return the first index pair closer than ``tol`` in every coordinate, or None."""
    loc = np.asarray(locations, dtype=float)
    if len(loc) < 2:
        return None
    pairs = cKDTree(loc).query_pairs(r=tol, p=np.inf, output_type="ndarray")
    if len(pairs) == 0:
        return None
    pairs = np.sort(pairs, axis=1)
    first = np.lexsort((pairs[:, 1], pairs[:, 0]))[0]
    return tuple(int(k) for k in pairs[first])


def check_distinct(locations):
    dup = find_duplicate(locations)
    if dup is not None:
        raise DuplicateLocation(*dup)


def build_dataset(locations, values, covariates=None):
    """Validate and bundle locations, attribute values and optional covariates.

    Parameters
    ----------
    locations : array_like, shape (n, d)
        Observation coordinates, d in {1, 2, 3}.
    values : array_like, shape (n,)
        Observed attribute values Z(s_i).
    covariates : array_like, shape (n, p), optional
        Regression design; the first column must be all ones.

    Raises
    ------
    EmptyDataset, DimensionMismatch, DuplicateLocation
    """
    vals = np.asarray(values, dtype=float).ravel()
    loc = np.asarray(locations, dtype=float)
    n_loc = 0 if loc.size == 0 else (loc.shape[0] if loc.ndim >= 1 else 1)
    if n_loc == 0 and vals.size == 0:
        raise EmptyDataset("dataset needs at least one observation")
    loc = as_locations(loc)
    if len(loc) != len(vals):
        raise DimensionMismatch(f"{len(loc)} locations but {len(vals)} values")
    if not np.all(np.isfinite(vals)):
        raise InputError("values must be finite")
    cov = None
    if covariates is not None:
        cov = np.asarray(covariates, dtype=float)
        if cov.ndim == 1:
            cov = cov[:, None]
        if cov.shape[0] != len(vals):
            raise DimensionMismatch(f"covariate matrix has {cov.shape[0]} rows, expected {len(vals)}")
        if not np.all(cov[:, 0] == 1.0):
            raise InputError("first covariate column must be the constant 1")
        if not np.all(np.isfinite(cov)):
            raise InputError("covariates must be finite")
    check_distinct(loc)
    loc.setflags(write=False)
    vals.setflags(write=False)
    return SpatialDataset(loc, vals, cov)


def read_dataset_csv(path):
    """Read ``x,y[,z],value[,cov1,...]``; covariates gain a leading ones column."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    if not rows:
        raise EmptyDataset(f"{path}: no header")
    header = [h.strip() for h in rows[0]]
    if "value" not in header:
        raise InputError(f"{path}: header must contain a 'value' column")
    vi = header.index("value")
    coord_names = header[:vi]
    if coord_names not in (["x"], ["x", "y"], ["x", "y", "z"]):
        raise InputError(f"{path}: expected coordinate columns x[,y[,z]] before 'value'")
    data = np.array([[float(c) for c in r] for r in rows[1:]], dtype=float).reshape(-1, len(header))
    cov = None
    if len(header) > vi + 1:
        extra = data[:, vi + 1:]
        cov = extra if np.all(extra[:, 0] == 1.0) else np.column_stack([np.ones(len(data)), extra])
    return build_dataset(data[:, :vi], data[:, vi], cov)


# ---------------------------------------------------------------------------
# basic areal units
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BauGrid:
    """Regular rectangular tessellation of a window.

    ``index`` holds each cell's integer grid position (x fastest), so cells
    clipped away by a polygon window leave gaps that raster writers can fill
    with a nodata value.
    """

    window: Window
    shape: tuple
    lower: np.ndarray
    upper: np.ndarray
    centroids: np.ndarray
    volumes: np.ndarray
    index: np.ndarray
    polygons: Optional[list] = field(default=None, repr=False)

    @property
    def n_cells(self):
        return len(self.volumes)

    @property
    def cell_size(self):
        return (self.window.upper - self.window.lower) / np.asarray(self.shape, dtype=float)

    def locate(self, points):
        """Position (into the cell list) of the cell containing each point; -1 if none."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        ij = np.floor((p - self.window.lower) / self.cell_size).astype(np.int64)
        shape = np.asarray(self.shape)
        ij = np.where(p == self.window.upper, ij - 1, ij)
        ok = np.all((ij >= 0) & (ij < shape), axis=1)
        flat = np.full(len(p), -1, dtype=np.int64)
        lookup = np.full(int(np.prod(shape)), -1, dtype=np.int64)
        lookup[_flat_index(self.index, self.shape)] = np.arange(self.n_cells)
        flat[ok] = lookup[_flat_index(ij[ok], self.shape)]
        return flat


def _flat_index(ij, shape):
    flat = np.zeros(len(ij), dtype=np.int64)
    stride = 1
    for axis, size in enumerate(shape):
        flat += ij[:, axis] * stride
        stride *= size
    return flat


def tessellate_baus(window, resolution):
    """Cover ``window`` with a regular grid of rectangular cells.

    ``resolution`` is the number of cells per axis, either one integer for
    all axes or one per axis. For polygon windows every rectangle is clipped
    to the polygon; the cell's volume and centroid become those of the
    clipped piece, and pieces of zero area are dropped.
    """
    d = window.dim
    res = np.broadcast_to(np.atleast_1d(np.asarray(resolution)), (d,)).astype(np.int64)
    if np.any(res < 1):
        raise ZeroResolution("resolution must be at least 1 cell per axis")
    axes = [np.linspace(window.lower[a], window.upper[a], res[a] + 1) for a in range(d)]
    grids = np.meshgrid(*[np.arange(r) for r in res], indexing="ij")
    # x varies fastest in the flattened cell list
    index = np.column_stack([g.transpose().ravel() for g in grids]) if d > 1 else grids[0].ravel()[:, None]
    lower = np.column_stack([axes[a][index[:, a]] for a in range(d)])
    upper = np.column_stack([axes[a][index[:, a] + 1] for a in range(d)])
    # snap the outer faces to the window bounds exactly
    upper = np.where(index == res - 1, window.upper, upper)
    centroids = 0.5 * (lower + upper)
    volumes = np.prod(upper - lower, axis=1)
    polygons = None
    if window.kind == "polygon":
        keep, cents, vols, polygons = [], [], [], []
        for k in range(len(lower)):
            (x0, y0), (x1, y1) = lower[k], upper[k]
            rect = np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]])
            piece = clip_polygon(rect, window.vertices)
            area = polygon_area(piece) if len(piece) >= 3 else 0.0
            if area <= 1e-14 * volumes[k]:
                continue
            keep.append(k)
            cents.append(polygon_centroid(piece))
            vols.append(area)
            polygons.append(piece)
        keep = np.asarray(keep, dtype=np.int64)
        lower, upper, index = lower[keep], upper[keep], index[keep]
        centroids, volumes = np.array(cents).reshape(-1, 2), np.asarray(vols)
    for arr in (lower, upper, centroids, volumes, index):
        arr.setflags(write=False)
    return BauGrid(window, tuple(int(r) for r in res), lower, upper, centroids, volumes, index, polygons)


# ---------------------------------------------------------------------------
# Gaussian conditioning
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GaussianSpec:
    """Multivariate Gaussian with mean vector and covariance matrix."""

    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.covariance, dtype=float))
        if cov.shape != (mu.size, mu.size):
            raise DimensionMismatch(f"covariance shape {cov.shape} does not match mean length {mu.size}")
        scale = max(1.0, float(np.max(np.abs(cov)))) if cov.size else 1.0
        if not np.allclose(cov, cov.T, rtol=0.0, atol=1e-12 * scale):
            raise InputError("covariance matrix is not symmetric")
        if cov.size:
            floor = -1e-10 * max(float(np.max(np.diag(cov))), 0.0)
            if np.linalg.eigvalsh(cov)[0] < floor:
                raise InputError("covariance matrix is not positive semi-definite")
        object.__setattr__(self, "mean", mu)
        object.__setattr__(self, "covariance", cov)

    @classmethod
    def _trusted(cls, mean, cov):
        obj = object.__new__(cls)
        object.__setattr__(obj, "mean", np.asarray(mean, dtype=float))
        object.__setattr__(obj, "covariance", np.asarray(cov, dtype=float))
        return obj

    @property
    def variances(self):
        return np.diag(self.covariance).copy()


def robust_cholesky(a, lower=True):
    """Cholesky factor of ``a``; on failure retry once with jitter 1e-10 * max diag.

    Raises ``np.linalg.LinAlgError`` if the retry also fails.
    """
    a = np.asarray(a, dtype=float)
    try:
        return sla.cholesky(a, lower=lower, check_finite=False)
    except np.linalg.LinAlgError:
        pass
    top = float(np.max(np.diag(a))) if a.size else 0.0
    if not top > 0:
        raise np.linalg.LinAlgError("matrix has no positive diagonal entry")
    bump = JITTER * top
    return sla.cholesky(a + bump * np.eye(len(a)), lower=lower, check_finite=False)


def gaussian_condition(spec, observed_indices, observed_values, noise_variances=None):
    """Condition a Gaussian vector on noisy observations of some coordinates.

    Observations are ``Z_o = Y_o + e`` with independent ``e_i ~ N(0, noise_i)``.
    Returns the conditional distribution of the unobserved coordinates, listed
    in increasing index order.
    """
    mu, sigma = spec.mean, spec.covariance
    n = mu.size
    obs = np.asarray(observed_indices, dtype=np.int64).ravel()
    z = np.asarray(observed_values, dtype=float).ravel()
    if obs.size != z.size:
        raise DimensionMismatch("observed indices and values differ in length")
    if obs.size and (obs.min() < 0 or obs.max() >= n):
        raise InputError("observed index out of range")
    if np.unique(obs).size != obs.size:
        raise InputError("observed indices must be distinct")
    noise = np.zeros(obs.size) if noise_variances is None else np.broadcast_to(
        np.asarray(noise_variances, dtype=float), (obs.size,))
    if np.any(noise < 0):
        raise InputError("noise variances must be non-negative")
    rest = np.setdiff1d(np.arange(n), obs)
    if obs.size == 0:
        return GaussianSpec._trusted(mu[rest].copy(), sigma[np.ix_(rest, rest)].copy())
    s_oo = sigma[np.ix_(obs, obs)] + np.diag(noise)
    s_ro = sigma[np.ix_(rest, obs)]
    try:
        chol = robust_cholesky(s_oo)
    except np.linalg.LinAlgError:
        raise SingularCovariance("observed covariance block is singular") from None
    gain = sla.cho_solve((chol, True), s_ro.T, check_finite=False).T
    cmean = mu[rest] + gain @ (z - mu[obs])
    ccov = sigma[np.ix_(rest, rest)] - gain @ s_ro.T
    ccov = 0.5 * (ccov + ccov.T)
    return GaussianSpec._trusted(cmean, ccov)


def gaussian_logpdf(x, mean, cov):
    """Log density of a multivariate normal via dense Cholesky."""
    x = np.asarray(x, dtype=float).ravel()
    r = x - np.asarray(mean, dtype=float).ravel()
    chol = robust_cholesky(cov)
    w = sla.solve_triangular(chol, r, lower=True, check_finite=False)
    return float(-0.5 * w @ w - np.log(np.diag(chol)).sum() - 0.5 * r.size * np.log(2 * np.pi))


def coerce_seed(seed):
    return np.random.default_rng(seed)


__all__ = [
    "Window",
    "SpatialDataset",
    "BauGrid",
    "GaussianSpec",
    "build_dataset",
    "read_dataset_csv",
    "tessellate_baus",
    "gaussian_condition",
    "gaussian_logpdf",
    "robust_cholesky",
    "polygon_area",
    "clip_polygon",
]
