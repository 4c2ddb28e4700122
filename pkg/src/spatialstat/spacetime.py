"""Space-time models on a fixed lattice: separable covariances and linear dynamics.

The dynamical model is

    Y_1 ~ N(m_0, P_0),   Y_t = M Y_{t-1} + eta_t,   eta_t ~ N(0, Q),
    Z_t = H_t Y_t + eps_t,   eps_t ~ N(0, diag(R[H_t])),

where H_t selects the lattice nodes observed at time t.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .core import GaussianSpec
from .errors import DimensionMismatch, InputError, NonPositiveInnovationCovariance

LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class STCovariance:
    """Separable covariance C(s, t; u, v) = C_s(|s - u|) C_t(|t - v|)."""

    spatial: object
    temporal: object


def st_covariance_at(stcov, s, t, u, v):
    h = float(np.linalg.norm(np.atleast_1d(np.asarray(s, dtype=float)) - np.atleast_1d(np.asarray(u, dtype=float))))
    lag = abs(float(t) - float(v))
    return float(stcov.spatial.covariance(h) * stcov.temporal.covariance(lag))


def _sym(a):
    return 0.5 * (a + a.T)


@dataclass(frozen=True, eq=False)
class StateSpaceModel:
    """Time-invariant linear Gaussian dynamics on ``m`` lattice nodes.

    ``obs_noise`` holds one measurement-error variance per lattice node.
    """

    transition: np.ndarray
    process_noise: np.ndarray
    obs_noise: np.ndarray
    initial: GaussianSpec

    def __post_init__(self):
        mt = np.atleast_2d(np.asarray(self.transition, dtype=float))
        q = np.atleast_2d(np.asarray(self.process_noise, dtype=float))
        r = np.atleast_1d(np.asarray(self.obs_noise, dtype=float)).ravel()
        m = mt.shape[0]
        if mt.shape != (m, m) or q.shape != (m, m) or self.initial.mean.size != m:
            raise DimensionMismatch("transition, process noise and initial state must share dimension m")
        if r.size == 1:
            r = np.full(m, r[0])
        if r.size != m:
            raise DimensionMismatch("one observation-noise variance per node is required")
        if np.any(r < 0):
            raise InputError("observation-noise variances must be non-negative")
        if not np.allclose(q, q.T, atol=1e-12 * max(1.0, float(np.abs(q).max(initial=0.0)))):
            raise InputError("process noise covariance must be symmetric")
        if np.linalg.eigvalsh(_sym(q))[0] < -1e-10 * max(1.0, float(np.trace(q))):
            raise InputError("process noise covariance must be positive semi-definite")
        object.__setattr__(self, "transition", mt)
        object.__setattr__(self, "process_noise", _sym(q))
        object.__setattr__(self, "obs_noise", r)

    @property
    def m(self):
        return self.transition.shape[0]


def dynamical_transition(adjacency, alpha, delta):
    """M = alpha * (row-normalised adjacency) + delta * I."""
    w = np.asarray(adjacency.toarray() if hasattr(adjacency, "toarray") else adjacency, dtype=float)
    rows = w.sum(axis=1, keepdims=True)
    norm = np.divide(w, rows, out=np.zeros_like(w), where=rows > 0)
    return alpha * norm + delta * np.eye(len(w))


@dataclass(frozen=True)
class Observation:
    """Data at one time step: observed lattice node indices and values."""

    nodes: np.ndarray
    values: np.ndarray


def observations_from_rows(k, rows):
    """Group (t, node_index, value) rows with t in 1..k into per-time observations."""
    rows = np.asarray(rows, dtype=float).reshape(-1, 3)
    out = []
    for t in range(1, k + 1):
        sel = rows[rows[:, 0] == t]
        order = np.argsort(sel[:, 1], kind="stable")
        out.append(Observation(sel[order, 1].astype(np.int64), sel[order, 2]))
    return out


def _as_observations(model, observations):
    obs = []
    for item in observations:
        if item is None:
            item = Observation(np.empty(0, np.int64), np.empty(0))
        elif not isinstance(item, Observation):
            nodes, values = item
            item = Observation(np.asarray(nodes, dtype=np.int64).ravel(), np.asarray(values, dtype=float).ravel())
        if item.nodes.size != item.values.size:
            raise DimensionMismatch("observed nodes and values differ in length")
        if item.nodes.size and (item.nodes.min() < 0 or item.nodes.max() >= model.m):
            raise DimensionMismatch("observed node index outside the lattice")
        if np.unique(item.nodes).size != item.nodes.size:
            raise DimensionMismatch("a node is observed twice at one time step")
        obs.append(item)
    if not obs:
        raise InputError("at least one time step is required")
    return obs


def simulate_dynamical(model, k, seed=None, observed=None):
    """Draw states Y_1..Y_k and observations Z_1..Z_k.

    ``observed`` lists the observed node indices per time step (all nodes by
    default). Returns an (k, m) state array and a list of :class:`Observation`.
    """
    k = int(k)
    if k < 1:
        raise InputError("k must be at least 1")
    rng = np.random.default_rng(seed)
    m = model.m

    def draw(cov):
        w, v = np.linalg.eigh(_sym(cov))
        return v @ (np.sqrt(np.clip(w, 0.0, None)) * rng.standard_normal(m))

    states = np.empty((k, m))
    states[0] = model.initial.mean + draw(model.initial.covariance)
    for t in range(1, k):
        states[t] = model.transition @ states[t - 1] + draw(model.process_noise)
    obs = []
    for t in range(k):
        nodes = np.arange(m) if observed is None else np.asarray(observed[t], dtype=np.int64)
        eps = rng.standard_normal(nodes.size) * np.sqrt(model.obs_noise[nodes])
        obs.append(Observation(nodes, states[t, nodes] + eps))
    return states, obs


@dataclass(frozen=True, eq=False)
class FilterOutput:
    """Filtered moments for t = 1..k and one-step forecasts.

    ``predicted_mean[t]`` is E[Y_{t+1} | Z_1..Z_t], so index 0 is the prior of
    Y_1 and index k the forecast of Y_{k+1}.
    """

    filtered_mean: np.ndarray
    filtered_cov: np.ndarray
    predicted_mean: np.ndarray
    predicted_cov: np.ndarray
    loglik: float

    @property
    def k(self):
        return self.filtered_mean.shape[0]

    def to_csv(self, path):
        from .gridio import fmt

        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("t,node_index,filtered_mean,filtered_sd\n")
            for t in range(self.k):
                sd = np.sqrt(np.clip(np.diag(self.filtered_cov[t]), 0.0, None))
                for i in range(self.filtered_mean.shape[1]):
                    fh.write(f"{t + 1},{i},{fmt(self.filtered_mean[t, i])},{fmt(sd[i])}\n")


def _predict(model, mean, cov):
    mt = model.transition
    return mt @ mean, _sym(mt @ cov @ mt.T + model.process_noise)


def _update(model, mean, cov, ob):
    """Joseph-form measurement update; returns mean, cov and log-likelihood term."""
    if ob.nodes.size == 0:
        return mean, cov, 0.0
    idx = ob.nodes
    s = cov[np.ix_(idx, idx)] + np.diag(model.obs_noise[idx])
    s = _sym(s)
    try:
        chol = sla.cholesky(s, lower=True)
    except np.linalg.LinAlgError:
        raise NonPositiveInnovationCovariance("innovation covariance is not positive definite") from None
    if np.min(np.diag(chol)) <= 0:
        raise NonPositiveInnovationCovariance("innovation covariance is not positive definite")
    innov = ob.values - mean[idx]
    gain = sla.cho_solve((chol, True), cov[idx, :], check_finite=False).T
    new_mean = mean + gain @ innov
    # (I - K H) P (I - K H)' + K R K'
    ikh = np.eye(len(mean))
    ikh[:, idx] -= gain
    new_cov = ikh @ cov @ ikh.T + (gain * model.obs_noise[idx]) @ gain.T
    white = sla.solve_triangular(chol, innov, lower=True)
    ll = -0.5 * (idx.size * LOG_2PI + 2.0 * np.sum(np.log(np.diag(chol))) + white @ white)
    return new_mean, _sym(new_cov), float(ll)


def kalman_filter(model, observations):
    """Sequential predict/update; time steps without data only predict."""
    obs = _as_observations(model, observations)
    k, m = len(obs), model.m
    fm, fc = np.empty((k, m)), np.empty((k, m, m))
    pm, pc = np.empty((k + 1, m)), np.empty((k + 1, m, m))
    mean, cov = model.initial.mean.copy(), _sym(model.initial.covariance.copy())
    loglik = 0.0
    for t in range(k):
        pm[t], pc[t] = mean, cov
        mean, cov, ll = _update(model, mean, cov, obs[t])
        loglik += ll
        fm[t], fc[t] = mean, cov
        mean, cov = _predict(model, mean, cov)
    pm[k], pc[k] = mean, cov
    return FilterOutput(fm, fc, pm, pc, loglik)


@dataclass(frozen=True, eq=False)
class SmootherOutput:
    smoothed_mean: np.ndarray
    smoothed_cov: np.ndarray


def kalman_smooth(model, observations, filtered=None):
    """Rauch-Tung-Striebel backward pass over the filter output."""
    out = kalman_filter(model, observations) if filtered is None else filtered
    k = out.k
    sm, sc = out.filtered_mean.copy(), out.filtered_cov.copy()
    mt = model.transition
    for t in range(k - 2, -1, -1):
        p_pred = out.predicted_cov[t + 1]
        cross = out.filtered_cov[t] @ mt.T
        # gain J = P_t M' P_{t+1|t}^+, pseudo-inverse for singular forecasts
        gain = np.linalg.lstsq(p_pred, cross.T, rcond=None)[0].T
        sm[t] = out.filtered_mean[t] + gain @ (sm[t + 1] - out.predicted_mean[t + 1])
        sc[t] = _sym(out.filtered_cov[t] + gain @ (sc[t + 1] - p_pred) @ gain.T)
    return SmootherOutput(sm, sc)


def kalman_forecast(model, filtered, horizon):
    """Means and covariances of Y_{k+1}..Y_{k+h} given all data."""
    horizon = int(horizon)
    if horizon < 1:
        raise InputError("horizon must be at least 1")
    m = model.m
    means, covs = np.empty((horizon, m)), np.empty((horizon, m, m))
    mean, cov = filtered.predicted_mean[-1], filtered.predicted_cov[-1]
    for h in range(horizon):
        means[h], covs[h] = mean, cov
        mean, cov = _predict(model, mean, cov)
    return means, covs


def stacked_covariance(model, k):
    """Mean (k*m,) and covariance (k*m, k*m) of (Y_1, ..., Y_k) stacked in time order."""
    m = model.m
    mt = model.transition
    means = [model.initial.mean]
    marg = [_sym(model.initial.covariance)]
    for _ in range(1, k):
        means.append(mt @ means[-1])
        marg.append(_sym(mt @ marg[-1] @ mt.T + model.process_noise))
    cov = np.zeros((k * m, k * m))
    for s in range(k):
        block = marg[s]
        for t in range(s, k):
            # cov(Y_s, Y_t) = P_s (M')^{t-s}
            cov[s * m:(s + 1) * m, t * m:(t + 1) * m] = block
            cov[t * m:(t + 1) * m, s * m:(s + 1) * m] = block.T
            block = block @ mt.T
    return np.concatenate(means), _sym(cov)


__all__ = [
    "STCovariance",
    "StateSpaceModel",
    "Observation",
    "FilterOutput",
    "SmootherOutput",
    "st_covariance_at",
    "dynamical_transition",
    "simulate_dynamical",
    "kalman_filter",
    "kalman_smooth",
    "kalman_forecast",
    "stacked_covariance",
    "observations_from_rows",
]
