"""Plain-text raster and CSV writers shared by the modules and the CLI."""

import csv

import numpy as np

NODATA = -9999.0


def fmt(x):
    """Stable text form of a float (12 significant digits)."""
    x = float(x)
    if not np.isfinite(x):
        return "nan"
    s = f"{x:.12g}"
    return "0" if s == "-0" else s


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def cells_to_array(shape, index, values, fill=np.nan):
    """Scatter per-cell values into an (ny, nx) array indexed [row=y, col=x]."""
    nx, ny = shape[0], shape[1]
    out = np.full((ny, nx), fill, dtype=float)
    out[index[:, 1], index[:, 0]] = values
    return out


def write_ascii_grid(path, array, xll, yll, cellsize, nodata=NODATA):
    """Write an (ny, nx) array, row 0 = southernmost, as a row-major text raster.

    The file starts with the six header lines ``ncols``, ``nrows``,
    ``xllcorner``-style ``xll``, ``yll``, ``cellsize`` and ``nodata``; data
    rows follow from north to south.
    """
    arr = np.asarray(array, dtype=float)
    ny, nx = arr.shape
    lines = [
        f"ncols {nx}",
        f"nrows {ny}",
        f"xll {fmt(xll)}",
        f"yll {fmt(yll)}",
        f"cellsize {fmt(cellsize)}",
        f"nodata {fmt(nodata)}",
    ]
    for row in arr[::-1]:
        lines.append(" ".join(fmt(v) if np.isfinite(v) else fmt(nodata) for v in row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_ascii_grid(path):
    """Inverse of :func:`write_ascii_grid`; nodata cells come back as NaN."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    head = dict(line.split(None, 1) for line in lines[:6])
    nodata = float(head["nodata"])
    rows = [[float(v) for v in line.split()] for line in lines[6:]]
    arr = np.array(rows[::-1], dtype=float)
    arr[arr == nodata] = np.nan
    return arr, {k: float(v) for k, v in head.items()}
