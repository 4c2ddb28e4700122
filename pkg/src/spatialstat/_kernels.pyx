# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops. Pure-Python twins live in ``_kernels_py``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()


def maxmin_order(const double[:, ::1] coords, Py_ssize_t first):
    """Greedy max-min distance ordering starting at ``first``; ties to lowest index."""
    cdef Py_ssize_t n = coords.shape[0], d = coords.shape[1]
    cdef Py_ssize_t i, k, a, r, pos, best, nxt
    cdef double dist, diff, bestval, bx, by, dx, dy
    order = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] out = order
    if n == 0:
        return order
    mind_arr = np.full(n, np.inf)
    cdef double[::1] mind = mind_arr
    # remaining nodes kept in increasing index order so scans break ties low
    rest_arr = np.arange(n, dtype=np.int64)
    cdef cnp.int64_t[::1] rest = rest_arr
    r = n
    best = first
    for i in range(first, n - 1):
        rest[i] = rest[i + 1]
    r -= 1
    for k in range(n):
        out[k] = best
        bestval = -1.0
        pos = -1
        if d == 2:
            bx = coords[best, 0]
            by = coords[best, 1]
            for i in range(r):
                nxt = rest[i]
                dx = coords[nxt, 0] - bx
                dy = coords[nxt, 1] - by
                dist = dx * dx + dy * dy
                if dist < mind[nxt]:
                    mind[nxt] = dist
                if mind[nxt] > bestval:
                    bestval = mind[nxt]
                    pos = i
        else:
            for i in range(r):
                nxt = rest[i]
                dist = 0.0
                for a in range(d):
                    diff = coords[nxt, a] - coords[best, a]
                    dist = dist + diff * diff
                if dist < mind[nxt]:
                    mind[nxt] = dist
                if mind[nxt] > bestval:
                    bestval = mind[nxt]
                    pos = i
        if pos < 0:
            break
        best = rest[pos]
        for i in range(pos, r - 1):
            rest[i] = rest[i + 1]
        r -= 1
    return order


def nearest_predecessors(const double[:, ::1] coords, Py_ssize_t q, Py_ssize_t n_data):
    """For each row i, the ``q`` nearest earlier rows (rows < n_data once i >= n_data).

    Output is padded with -1; ties go to the lower row index.
    """
    cdef Py_ssize_t n = coords.shape[0], d = coords.shape[1]
    cdef Py_ssize_t i, j, a, m, pos, limit
    cdef double dist, diff
    nbrs = np.full((n, q if q > 0 else 0), -1, dtype=np.int64)
    if q <= 0:
        return nbrs
    cdef cnp.int64_t[:, ::1] out = nbrs
    bd_arr = np.empty(q)
    bi_arr = np.empty(q, dtype=np.int64)
    cdef double[::1] bd = bd_arr
    cdef cnp.int64_t[::1] bi = bi_arr
    for i in range(n):
        limit = i if i < n_data else n_data
        m = 0
        for j in range(limit):
            dist = 0.0
            for a in range(d):
                diff = coords[j, a] - coords[i, a]
                dist = dist + diff * diff
            if m == q and dist >= bd[q - 1]:
                continue
            pos = m if m < q else q - 1
            while pos > 0 and bd[pos - 1] > dist:
                if pos < q:
                    bd[pos] = bd[pos - 1]
                    bi[pos] = bi[pos - 1]
                pos -= 1
            bd[pos] = dist
            bi[pos] = j
            if m < q:
                m += 1
        for j in range(m):
            out[i, j] = bi[j]
    return nbrs


def translation_pair_sums(const double[:, ::1] pts, const double[::1] radii, double width, double height):
    """Sum over ordered pairs i != j with distance <= r of 1 / |W cap (W + s_i - s_j)| for a box W."""
    cdef Py_ssize_t n = pts.shape[0], nr = radii.shape[0]
    cdef Py_ssize_t i, j, lo, hi, mid
    cdef double dx, dy, d2, w, rmax2
    acc_arr = np.zeros(nr)
    cdef double[::1] acc = acc_arr
    r2_arr = np.asarray(radii, dtype=float) ** 2
    cdef double[::1] r2 = r2_arr
    if nr == 0:
        return acc_arr
    rmax2 = r2[nr - 1]
    for i in range(n):
        for j in range(i + 1, n):
            dx = fabs(pts[i, 0] - pts[j, 0])
            dy = fabs(pts[i, 1] - pts[j, 1])
            d2 = dx * dx + dy * dy
            if d2 > rmax2:
                continue
            w = 2.0 / ((width - dx) * (height - dy))
            lo = 0
            hi = nr - 1
            while lo < hi:
                mid = (lo + hi) // 2
                if r2[mid] >= d2:
                    hi = mid
                else:
                    lo = mid + 1
            acc[lo] += w
    for i in range(1, nr):
        acc[i] += acc[i - 1]
    return acc_arr


def gibbs_sweeps(const int[::1] indptr, const int[::1] indices, const double[::1] data,
                 const double[::1] sd, const cnp.int64_t[::1] first, const cnp.int64_t[::1] second,
                 double[::1] y, const double[:, ::1] normals, Py_ssize_t burn_in):
    """Two-colour Gibbs sweeps for a Gaussian CAR; records states after ``burn_in`` sweeps."""
    cdef Py_ssize_t n_sweeps = normals.shape[0], m = y.shape[0]
    cdef Py_ssize_t t, c, k, node, p
    cdef double s
    cdef const cnp.int64_t[::1] colour
    n_keep = n_sweeps - burn_in if n_sweeps > burn_in else 0
    samples = np.empty((n_keep, m))
    cdef double[:, ::1] out = samples
    for t in range(n_sweeps):
        for c in range(2):
            colour = first if c == 0 else second
            for k in range(colour.shape[0]):
                node = colour[k]
                s = 0.0
                for p in range(indptr[node], indptr[node + 1]):
                    s = s + data[p] * y[indices[p]]
                y[node] = s + sd[node] * normals[t, node]
        if t >= burn_in:
            for k in range(m):
                out[t - burn_in, k] = y[k]
    return samples
