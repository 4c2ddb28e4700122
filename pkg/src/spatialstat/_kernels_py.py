"""Numpy implementations of the compiled kernels, same signatures and results."""

import numpy as np


def maxmin_order(coords, first):
    n = coords.shape[0]
    order = np.empty(n, dtype=np.int64)
    if n == 0:
        return order
    mind = np.full(n, np.inf)
    taken = np.zeros(n, dtype=bool)
    best = int(first)
    for k in range(n):
        order[k] = best
        taken[best] = True
        mind[best] = -1.0
        diff = coords - coords[best]
        dist = (diff * diff).sum(axis=1)
        np.minimum(mind, np.where(taken, -1.0, dist), out=mind)
        if k + 1 < n:
            best = int(np.argmax(mind))
    return order


def nearest_predecessors(coords, q, n_data):
    n = coords.shape[0]
    nbrs = np.full((n, max(q, 0)), -1, dtype=np.int64)
    if q <= 0:
        return nbrs
    for i in range(n):
        limit = i if i < n_data else n_data
        if limit == 0:
            continue
        diff = coords[:limit] - coords[i]
        dist = (diff * diff).sum(axis=1)
        take = np.argsort(dist, kind="stable")[:q]
        nbrs[i, :len(take)] = take
    return nbrs


def translation_pair_sums(pts, radii, width, height):
    radii = np.asarray(radii, dtype=float)
    n = len(pts)
    if n < 2 or radii.size == 0:
        return np.zeros(radii.size)
    i, j = np.triu_indices(n, k=1)
    dx = np.abs(pts[i, 0] - pts[j, 0])
    dy = np.abs(pts[i, 1] - pts[j, 1])
    d2 = dx * dx + dy * dy
    keep = d2 <= radii[-1] ** 2
    w = 2.0 / ((width - dx[keep]) * (height - dy[keep]))
    bins = np.searchsorted(radii ** 2, d2[keep], side="left")
    return np.cumsum(np.bincount(bins, weights=w, minlength=radii.size))


def gibbs_sweeps(indptr, indices, data, sd, first, second, y, normals, burn_in):
    import scipy.sparse as sp

    m = y.shape[0]
    c = sp.csr_matrix((data, indices, indptr), shape=(m, m))
    rows = (c[first], c[second])
    colours = (first, second)
    n_sweeps = normals.shape[0]
    samples = np.empty((max(n_sweeps - burn_in, 0), m))
    for t in range(n_sweeps):
        for rows_c, colour in zip(rows, colours):
            y[colour] = rows_c @ y + sd[colour] * normals[t, colour]
        if t >= burn_in:
            samples[t - burn_in] = y
    return samples
