"""Batch command-line front end.

    spatial <command> --config <path> [--out <dir>] [--seed <u64>] [--threads <n>]

The config file holds ``key = value`` lines; ``#`` starts a comment. Unknown
keys are rejected. Relative paths are resolved against the config file's
directory. Outputs are staged in a hidden directory and moved into place only
after the whole command succeeds.

Exit status: 0 on success, 2 on invalid input, 1 on numerical failure.
"""

from __future__ import annotations

import argparse
import os
import shutil
import sys
import tempfile

import numpy as np

from . import gridio
from .core import Window, read_dataset_csv, tessellate_baus
from .covariance import CovarianceModel, empirical_variogram, fit_variogram
from .errors import ConfigError, EmptyMap, InputError, NumericalError

COMMANDS = ("variogram", "krige", "car", "simulate-pp", "csr-test", "cokrige", "vecchia-krige", "kalman")
STOCHASTIC = ("car", "simulate-pp", "csr-test")
REQUIRED = object()

# ---------------------------------------------------------------------------
# config parsing
# ---------------------------------------------------------------------------


def _floats(text):
    return [float(v) for v in text.replace(",", " ").split()]


def _int(text):
    return int(text)


def _float(text):
    return float(text)


def _str(text):
    return text


def _opt_float(text):
    return None if text.lower() in ("", "none") else float(text)


def _path(text):
    return text


MODEL_KEYS = {
    "family": (_str, REQUIRED),
    "sill": (_float, REQUIRED),
    "range": (_float, REQUIRED),
    "nugget": (_float, 0.0),
    "smoothness": (_opt_float, None),
}

GRID_KEYS = {
    "window": (_floats, REQUIRED),
    "resolution": (_floats, REQUIRED),
}

SCHEMAS = {
    "variogram": {
        "data": (_path, REQUIRED),
        "n_bins": (_int, 15),
        "max_lag": (_opt_float, None),
        "family": (_str, None),
        "smoothness": (_opt_float, None),
    },
    "krige": {
        "data": (_path, REQUIRED),
        **MODEL_KEYS,
        **GRID_KEYS,
        "kriging": (_str, "ordinary"),
        "mean": (_float, 0.0),
        "trend": (_str, "1"),
        "measurement_noise": (_float, 0.0),
    },
    "car": {
        "nx": (_int, REQUIRED),
        "ny": (_int, REQUIRED),
        "order": (_str, "first"),
        "rho": (_float, REQUIRED),
        "tau2": (_float, 1.0),
        "n_samples": (_int, 1),
        "method": (_str, "exact"),
        "burn_in": (_int, 50),
        "observations": (_path, None),
        "noise": (_float, 0.0),
        "seed": (_int, None),
    },
    "simulate-pp": {
        "window": (_floats, REQUIRED),
        "process": (_str, "poisson"),
        "lambda": (_float, None),
        "slope_x": (_float, 0.0),
        "slope_y": (_float, 0.0),
        "gp_mean": (_float, None),
        "family": (_str, "exponential"),
        "sill": (_float, 1.0),
        "range": (_float, 0.1),
        "nugget": (_float, 0.0),
        "smoothness": (_opt_float, None),
        "resolution": (_floats, [10.0]),
        "seed": (_int, None),
    },
    "csr-test": {
        "pattern": (_path, REQUIRED),
        "n_sim": (_int, 99),
        "statistic": (_str, "k-deviation"),
        "quadrats": (_int, 4),
        "seed": (_int, None),
    },
    "cokrige": {
        "data1": (_path, REQUIRED),
        "data2": (_path, None),
        "target": (_int, 2),
        "mean1": (_floats, [0.0]),
        "mean2": (_floats, [0.0]),
        **{f"{k}1": v for k, v in MODEL_KEYS.items()},
        **{f"{k}2": v for k, v in MODEL_KEYS.items()},
        "kernel": (_str, "zero"),
        "kernel_beta": (_float, 1.0),
        "kernel_amplitude": (_float, 1.0),
        "kernel_scale": (_float, 0.02),
        "kernel_shift": (_floats, [0.0, 0.0]),
        "mesh_resolution": (_floats, [16.0]),
        "noise1": (_float, 0.0),
        "noise2": (_float, 0.0),
        **GRID_KEYS,
    },
    "vecchia-krige": {
        "data": (_path, REQUIRED),
        **MODEL_KEYS,
        **GRID_KEYS,
        "q": (_int, 10),
        "strategy": (_str, "maxmin"),
        "mean": (_float, 0.0),
        "measurement_noise": (_float, 0.0),
    },
    "kalman": {
        "nx": (_int, REQUIRED),
        "ny": (_int, REQUIRED),
        "alpha": (_float, REQUIRED),
        "delta": (_float, REQUIRED),
        "process_variance": (_float, 1.0),
        "obs_noise": (_float, 0.1),
        "initial_mean": (_float, 0.0),
        "initial_variance": (_float, 1.0),
        "observations": (_path, REQUIRED),
        "k": (_int, None),
        "horizon": (_int, 0),
    },
}

PATH_KEYS = ("data", "data1", "data2", "pattern", "observations")


def parse_config_text(text):
    """Flat ``key = value`` pairs; duplicate keys and malformed lines are errors."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", "expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}", "missing key")
        if key in out:
            raise ConfigError(key, "duplicate key")
        out[key] = value
    return out


def load_config(command, path, seed=None):
    """Parse and validate a config file for ``command``."""
    if command not in SCHEMAS:
        raise ConfigError("command", f"unknown command {command!r}")
    try:
        with open(path, encoding="utf-8") as fh:
            raw = parse_config_text(fh.read())
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
    schema = SCHEMAS[command]
    for key in raw:
        if key not in schema:
            raise ConfigError(key, "unknown key")
    base = os.path.dirname(os.path.abspath(path))
    cfg = {}
    for key, (parse, default) in schema.items():
        if key in raw:
            try:
                cfg[key] = parse(raw[key])
            except ValueError:
                raise ConfigError(key, f"cannot parse {raw[key]!r}") from None
        elif default is REQUIRED:
            raise ConfigError(key, "required key is missing")
        else:
            cfg[key] = default
        if key in PATH_KEYS and cfg[key] is not None:
            full = cfg[key] if os.path.isabs(cfg[key]) else os.path.join(base, cfg[key])
            if not os.path.isfile(full):
                raise ConfigError(key, f"file not found: {cfg[key]}")
            cfg[key] = full
    if seed is not None and "seed" in schema:
        cfg["seed"] = seed
    if command in STOCHASTIC and cfg.get("seed") is None:
        raise ConfigError("seed", "a seed is required for stochastic commands")
    return cfg


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------


def render_map(array, path):
    """Write a 2-d array as a 16-bit binary PGM, first row at the top.

    Finite values are scaled linearly onto 1..65535; NaN cells are 0. A
    constant map is drawn mid-gray (32768).
    """
    a = np.asarray(array, dtype=float)
    if a.ndim != 2 or a.size == 0 or not np.any(np.isfinite(a)):
        raise EmptyMap("nothing to render")
    finite = np.isfinite(a)
    lo, hi = float(a[finite].min()), float(a[finite].max())
    levels = np.zeros(a.shape, dtype=">u2")
    if hi > lo:
        scaled = 1.0 + np.round((a[finite] - lo) / (hi - lo) * 65534.0)
        levels[finite] = np.clip(scaled, 1, 65535).astype(np.uint16)
    else:
        levels[finite] = 32768
    rows, cols = a.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{cols} {rows}\n65535\n".encode("ascii"))
        fh.write(levels.tobytes())


def _north_up(array):
    # grid arrays are stored with row 0 at the southern edge
    return np.asarray(array)[::-1]


def _window(cfg, key="window"):
    v = cfg[key]
    if len(v) != 4:
        raise ConfigError(key, "expected 'x0 y0 x1 y1'")
    try:
        return Window.box(v[:2], v[2:])
    except InputError as exc:
        raise ConfigError(key, str(exc)) from None


def _resolution(cfg, key="resolution"):
    v = cfg[key]
    if len(v) not in (1, 2) or any(r != int(r) for r in v):
        raise ConfigError(key, "expected one or two integers")
    return [int(r) for r in v] if len(v) == 2 else int(v[0])


def _model(cfg, suffix=""):
    try:
        return CovarianceModel(cfg[f"family{suffix}"], cfg[f"sill{suffix}"], cfg[f"range{suffix}"],
                               cfg[f"nugget{suffix}"], cfg[f"smoothness{suffix}"])
    except InputError as exc:
        raise ConfigError(_offending_key(str(exc), suffix), str(exc)) from None


def _offending_key(msg, suffix):
    for key in ("sill", "range", "nugget", "smoothness", "family"):
        if key in msg:
            return key + suffix
    return "model" + suffix


def _write_map_outputs(out, stem, grid, values):
    arr = gridio.cells_to_array(grid.shape, grid.index, values)
    render_map(_north_up(arr), os.path.join(out, f"{stem}.pgm"))


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_variogram(cfg, out):
    from scipy.spatial.distance import pdist

    ds = read_dataset_csv(cfg["data"])
    max_lag = cfg["max_lag"]
    if max_lag is None:
        # half the largest inter-point distance
        max_lag = 0.5 * float(pdist(ds.locations).max(initial=0.0))
    if not max_lag > 0:
        raise ConfigError("max_lag", "must be positive")
    if cfg["n_bins"] < 1:
        raise ConfigError("n_bins", "must be at least 1")
    ev = empirical_variogram(ds, cfg["n_bins"], max_lag)
    ev.to_csv(os.path.join(out, "variogram.csv"))
    if cfg["family"]:
        model = fit_variogram(ev, cfg["family"], smoothness=cfg["smoothness"])
        with open(os.path.join(out, "fit.txt"), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(f"family = {model.family}\n")
            for key in ("sill", "range", "nugget"):
                fh.write(f"{key} = {gridio.fmt(getattr(model, key))}\n")
            if model.smoothness is not None:
                fh.write(f"smoothness = {gridio.fmt(model.smoothness)}\n")


def cmd_krige(cfg, out):
    from .kriging import KrigingSystem, PredictionMap, TrendSpec, kriging_map

    ds = read_dataset_csv(cfg["data"])
    model = _model(cfg)
    grid = tessellate_baus(_window(cfg), _resolution(cfg))
    kind = cfg["kriging"]
    if kind == "simple":
        system = KrigingSystem(ds.locations, ds.values, model, cfg["measurement_noise"])
        pred, var, _ = system.predict(grid.centroids, mean0=np.full(grid.n_cells, cfg["mean"]),
                                      data_mean=np.full(ds.n, cfg["mean"]))
        pmap = PredictionMap(grid, pred, np.sqrt(var))
    elif kind in ("ordinary", "universal"):
        try:
            trend = TrendSpec.parse("1" if kind == "ordinary" else cfg["trend"])
        except InputError as exc:
            raise ConfigError("trend", str(exc)) from None
        pmap = kriging_map(ds, model, trend, grid, cfg["measurement_noise"])
    else:
        raise ConfigError("kriging", "expected simple, ordinary or universal")
    pmap.to_csv(os.path.join(out, "predictions.csv"))
    _write_map_outputs(out, "prediction", grid, pmap.predictions)
    _write_map_outputs(out, "standard_error", grid, pmap.standard_errors)


def _read_rows(path, header):
    with open(path, encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines or [h.strip() for h in lines[0].split(",")] != header:
        raise InputError(f"{path}: header must be '{','.join(header)}'")
    return np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]]).reshape(-1, len(header))


def cmd_car(cfg, out):
    from .lattice import build_grid_graph, car_predict, field_to_raster, homogeneous_car, sample_car

    graph = build_grid_graph(cfg["nx"], cfg["ny"], cfg["order"])
    model = homogeneous_car(graph, cfg["rho"], cfg["tau2"])
    samples = sample_car(model, cfg["n_samples"], seed=cfg["seed"], method=cfg["method"],
                         burn_in=cfg["burn_in"])
    graph.to_edge_csv(os.path.join(out, "graph.csv"))
    gridio.write_csv(os.path.join(out, "samples.csv"), ["sample", "node_index", "value"],
                     ((s + 1, i, float(samples[s, i])) for s in range(len(samples))
                      for i in range(samples.shape[1])))
    nx, ny = graph.shape
    if len(samples):
        field_to_raster(os.path.join(out, "sample.asc"), graph, samples[0])
        render_map(_north_up(samples[0].reshape(ny, nx)), os.path.join(out, "sample.pgm"))
    if cfg["observations"]:
        rows = _read_rows(cfg["observations"], ["node_index", "value"])
        means, variances = car_predict(model, rows[:, 0].astype(np.int64), rows[:, 1],
                                       cfg["noise"] if cfg["noise"] > 0 else None)
        gridio.write_csv(os.path.join(out, "predictions.csv"), ["node_index", "prediction", "standard_error"],
                         ((i, float(means[i]), float(np.sqrt(variances[i]))) for i in range(len(means))))
        render_map(_north_up(np.asarray(means).reshape(ny, nx)), os.path.join(out, "prediction.pgm"))


def cmd_simulate_pp(cfg, out):
    from .pointproc import (
        IntensityFunction,
        simulate_homogeneous_poisson,
        simulate_inhomogeneous_poisson,
        simulate_lgcp,
    )

    window = _window(cfg)
    process = cfg["process"]
    if process in ("poisson", "inhomogeneous") and cfg["lambda"] is None:
        raise ConfigError("lambda", f"required for process = {process}")
    if process == "poisson":
        pattern = simulate_homogeneous_poisson(window, cfg["lambda"], seed=cfg["seed"])
    elif process == "inhomogeneous":
        lam, bx, by = cfg["lambda"], cfg["slope_x"], cfg["slope_y"]
        corners = np.array([[x, y] for x in (window.lower[0], window.upper[0])
                            for y in (window.lower[1], window.upper[1])])
        vals = lam + bx * corners[:, 0] + by * corners[:, 1]
        if np.any(vals < 0):
            raise ConfigError("lambda", "linear intensity is negative somewhere in the window")
        intensity = IntensityFunction.from_callable(lambda p: lam + bx * p[:, 0] + by * p[:, 1], vals.max())
        pattern = simulate_inhomogeneous_poisson(window, intensity, seed=cfg["seed"])
    elif process == "lgcp":
        if cfg["gp_mean"] is None:
            raise ConfigError("gp_mean", "required for process = lgcp")
        grid = tessellate_baus(window, _resolution(cfg))
        pattern, field = simulate_lgcp(window, grid, cfg["gp_mean"], _model(cfg), seed=cfg["seed"])
        c = grid.centroids
        gridio.write_csv(os.path.join(out, "log_intensity.csv"), ["cell_x", "cell_y", "log_intensity"],
                         ((float(c[k, 0]), float(c[k, 1]), float(field[k])) for k in range(grid.n_cells)))
        _write_map_outputs(out, "log_intensity", grid, field)
    else:
        raise ConfigError("process", "expected poisson, inhomogeneous or lgcp")
    pattern.to_csv(os.path.join(out, "points.csv"))


def cmd_csr_test(cfg, out):
    from .pointproc import csr_test, read_pattern_csv

    pattern = read_pattern_csv(cfg["pattern"])
    if cfg["statistic"] not in ("k-deviation", "quadrat-chi2"):
        raise ConfigError("statistic", "expected k-deviation or quadrat-chi2")
    result = csr_test(pattern, cfg["n_sim"], seed=cfg["seed"], statistic=cfg["statistic"],
                      quadrats=cfg["quadrats"])
    with open(os.path.join(out, "csr_report.txt"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(result.report())


def _kernel(cfg, mesh):
    from .multivariate import InteractionKernel

    kind = cfg["kernel"]
    if kind == "zero":
        return InteractionKernel.zero()
    if kind == "local_average":
        return InteractionKernel.local_average(cfg["kernel_beta"], mesh)
    if kind == "gaussian":
        if len(cfg["kernel_shift"]) != 2:
            raise ConfigError("kernel_shift", "expected 'dx dy'")
        try:
            return InteractionKernel.gaussian(cfg["kernel_amplitude"], cfg["kernel_scale"], cfg["kernel_shift"])
        except InputError as exc:
            raise ConfigError("kernel_scale", str(exc)) from None
    raise ConfigError("kernel", "expected zero, local_average or gaussian")


def cmd_cokrige(cfg, out):
    from .multivariate import BivariateModel, cokrige

    window = _window(cfg)
    mesh = tessellate_baus(window, _resolution(cfg, "mesh_resolution"))
    try:
        model = BivariateModel(_mean_coef(cfg, "mean1"), _mean_coef(cfg, "mean2"), _model(cfg, "1"),
                               _model(cfg, "2"), _kernel(cfg, mesh), mesh)
    except InputError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("mesh_resolution", str(exc)) from None
    if cfg["target"] not in (1, 2):
        raise ConfigError("target", "expected 1 or 2")
    data1 = read_dataset_csv(cfg["data1"])
    data2 = read_dataset_csv(cfg["data2"]) if cfg["data2"] else None
    grid = tessellate_baus(window, _resolution(cfg))
    preds, ses = np.empty(grid.n_cells), np.empty(grid.n_cells)
    chunk = 256
    for start in range(0, grid.n_cells, chunk):
        res = cokrige(model, data1, data2, cfg["target"], grid.centroids[start:start + chunk],
                      (cfg["noise1"], cfg["noise2"]))
        preds[start:start + chunk] = res.prediction
        ses[start:start + chunk] = res.standard_error
    c = grid.centroids
    gridio.write_csv(os.path.join(out, "predictions.csv"), ["cell_x", "cell_y", "prediction", "standard_error"],
                     ((float(c[k, 0]), float(c[k, 1]), float(preds[k]), float(ses[k])) for k in range(grid.n_cells)))
    _write_map_outputs(out, "prediction", grid, preds)


def _mean_coef(cfg, key):
    v = cfg[key]
    if len(v) not in (1, 3):
        raise ConfigError(key, "expected a constant or 'b0 bx by'")
    return v[0] if len(v) == 1 else np.asarray(v)


def cmd_vecchia_krige(cfg, out):
    from .vecchia import STRATEGIES, vecchia_krige

    ds = read_dataset_csv(cfg["data"])
    model = _model(cfg)
    if cfg["strategy"] not in STRATEGIES:
        raise ConfigError("strategy", f"expected one of {', '.join(STRATEGIES)}")
    if cfg["q"] < 0:
        raise ConfigError("q", "must be non-negative")
    grid = tessellate_baus(_window(cfg), _resolution(cfg))
    res = vecchia_krige(ds, model, grid.centroids, cfg["q"], cfg["strategy"], cfg["measurement_noise"],
                        cfg["mean"])
    c = grid.centroids
    gridio.write_csv(os.path.join(out, "predictions.csv"), ["cell_x", "cell_y", "prediction", "standard_error"],
                     ((float(c[k, 0]), float(c[k, 1]), float(res.prediction[k]), float(res.standard_error[k]))
                      for k in range(grid.n_cells)))
    _write_map_outputs(out, "prediction", grid, res.prediction)


def cmd_kalman(cfg, out):
    from .core import GaussianSpec
    from .lattice import build_grid_graph
    from .spacetime import StateSpaceModel, dynamical_transition, kalman_filter, kalman_forecast, kalman_smooth
    from .spacetime import observations_from_rows

    graph = build_grid_graph(cfg["nx"], cfg["ny"])
    m = graph.n_nodes
    for key in ("process_variance", "initial_variance"):
        if cfg[key] <= 0:
            raise ConfigError(key, "must be strictly positive")
    if cfg["obs_noise"] < 0:
        raise ConfigError("obs_noise", "must be non-negative")
    rows = _read_rows(cfg["observations"], ["t", "node_index", "value"])
    k = cfg["k"] if cfg["k"] is not None else int(rows[:, 0].max(initial=1))
    if k < 1:
        raise ConfigError("k", "must be at least 1")
    if rows.size and (rows[:, 0].min() < 1 or rows[:, 0].max() > k or np.any(rows[:, 0] != np.round(rows[:, 0]))):
        raise ConfigError("observations", f"time indices must be integers in 1..{k}")
    if cfg["horizon"] < 0:
        raise ConfigError("horizon", "must be non-negative")
    model = StateSpaceModel(dynamical_transition(graph.weights, cfg["alpha"], cfg["delta"]),
                            cfg["process_variance"] * np.eye(m), np.full(m, cfg["obs_noise"]),
                            GaussianSpec(np.full(m, cfg["initial_mean"]), cfg["initial_variance"] * np.eye(m)))
    obs = observations_from_rows(k, rows)
    filt = kalman_filter(model, obs)
    filt.to_csv(os.path.join(out, "filtered.csv"))
    smooth = kalman_smooth(model, obs, filt)
    _write_moments(os.path.join(out, "smoothed.csv"), "smoothed", 1, smooth.smoothed_mean, smooth.smoothed_cov)
    if cfg["horizon"] > 0:
        means, covs = kalman_forecast(model, filt, cfg["horizon"])
        _write_moments(os.path.join(out, "forecast.csv"), "forecast", k + 1, means, covs)
    with open(os.path.join(out, "loglik.txt"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"loglik = {gridio.fmt(filt.loglik)}\n")


def _write_moments(path, name, t0, means, covs):
    def rows():
        for t in range(len(means)):
            sd = np.sqrt(np.clip(np.diag(covs[t]), 0.0, None))
            for i in range(means.shape[1]):
                yield t0 + t, i, float(means[t, i]), float(sd[i])

    gridio.write_csv(path, ["t", "node_index", f"{name}_mean", f"{name}_sd"], rows())


HANDLERS = {
    "variogram": cmd_variogram,
    "krige": cmd_krige,
    "car": cmd_car,
    "simulate-pp": cmd_simulate_pp,
    "csr-test": cmd_csr_test,
    "cokrige": cmd_cokrige,
    "vecchia-krige": cmd_vecchia_krige,
    "kalman": cmd_kalman,
}

# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------


def _thread_count(cli_value):
    env = os.environ.get("SPATIAL_THREADS")
    if env is not None and env.strip():
        try:
            value = int(env)
        except ValueError:
            raise ConfigError("SPATIAL_THREADS", f"not an integer: {env!r}") from None
    else:
        value = cli_value
    if value is not None and value < 1:
        raise ConfigError("threads", "must be at least 1")
    return value


def run(command, config_path, out_dir="out", seed=None, threads=None):
    """Run one command; returns the exit status and writes outputs atomically."""
    stage = None
    try:
        n_threads = _thread_count(threads)
        cfg = load_config(command, config_path, seed)
        os.makedirs(out_dir, exist_ok=True)
        stage = tempfile.mkdtemp(prefix=".staging-", dir=out_dir)
        if n_threads is None:
            HANDLERS[command](cfg, stage)
        else:
            from threadpoolctl import threadpool_limits

            with threadpool_limits(limits=n_threads):
                HANDLERS[command](cfg, stage)
        for name in sorted(os.listdir(stage)):
            os.replace(os.path.join(stage, name), os.path.join(out_dir, name))
        return 0
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    finally:
        if stage is not None:
            shutil.rmtree(stage, ignore_errors=True)


def build_parser():
    parser = argparse.ArgumentParser(prog="spatial", description="Spatial statistics pipelines.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="key = value config file")
    parser.add_argument("--out", default="out", help="output directory (default: ./out)")
    parser.add_argument("--seed", type=int, default=None, help="seed overriding the config's")
    parser.add_argument("--threads", type=int, default=None, help="BLAS thread limit (SPATIAL_THREADS overrides)")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2 ** 64:
        print("error: seed: must be an unsigned 64-bit integer", file=sys.stderr)
        return 2
    return run(args.command, args.config, args.out, args.seed, args.threads)


if __name__ == "__main__":
    sys.exit(main())
