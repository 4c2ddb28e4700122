import json
import os

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from conftest import FIXTURES
from spatialstat.core import Window, tessellate_baus
from spatialstat.covariance import CovarianceModel
from spatialstat.errors import (
    NegativeIntensity,
    RadiusTooLarge,
    RegionOutsideWindow,
    TooFewPoints,
    TooFewSimulations,
    UnboundedIntensity,
)
from spatialstat.pointproc import (
    IntensityFunction,
    PointPattern,
    count,
    csr_test,
    estimate_k_function,
    read_pattern_csv,
    simulate_homogeneous_poisson,
    simulate_inhomogeneous_poisson,
    simulate_lgcp,
)

UNIT = Window.unit_square()
LEFT = Window.box([0, 0], [0.5, 1])
RIGHT = Window.box([0.5, 0], [1, 1])


def counts(sim, reps, **kw):
    return np.array([sim(seed=s, **kw).n for s in range(reps)])


def poisson_bins(n, lam, min_expected=5.0):
    # bins 0..K-1 plus a tail bin, then merge neighbours until every bin expects >= 5
    k = int(n.max()) + 1
    obs = list(np.bincount(n, minlength=k)[:k]) + [0]
    exp = list(stats.poisson.pmf(np.arange(k), lam) * n.size) + [stats.poisson.sf(k - 1, lam) * n.size]
    while exp[0] < min_expected:
        o, e = obs.pop(0), exp.pop(0)
        obs[0] += o
        exp[0] += e
    while exp[-1] < min_expected:
        o, e = obs.pop(), exp.pop()
        obs[-1] += o
        exp[-1] += e
    return np.array(obs), np.array(exp)


def within_3_sigma(sample, mean, var):
    return abs(sample.mean() - mean) <= 3 * np.sqrt(var / sample.size)


def test_zero_intensity_empty():
    assert simulate_homogeneous_poisson(UNIT, 0.0, seed=1).n == 0
    zero = IntensityFunction.constant(0.0)
    assert simulate_inhomogeneous_poisson(UNIT, zero, seed=1).n == 0


def test_negative_intensity():
    with pytest.raises(NegativeIntensity):
        simulate_homogeneous_poisson(UNIT, -1.0, seed=1)


def test_unbounded_intensity():
    with pytest.raises(UnboundedIntensity):
        IntensityFunction.from_callable(lambda p: p[:, 0], np.inf)


def test_seeded_simulation_reproducible():
    a = simulate_homogeneous_poisson(UNIT, 50, seed=7)
    b = simulate_homogeneous_poisson(UNIT, 50, seed=7)
    assert np.array_equal(a.points, b.points)


@pytest.mark.parametrize("lam", [5.0, 50.0])
def test_poisson_count_law(lam):
    n = counts(lambda seed: simulate_homogeneous_poisson(UNIT, lam, seed), 10000)
    assert within_3_sigma(n, lam, lam)
    assert 0.95 <= n.var(ddof=1) / n.mean() <= 1.05
    obs, exp = poisson_bins(n, lam)
    assert stats.chisquare(obs, exp).pvalue > 0.01


def test_constant_thinning_matches_homogeneous():
    const = IntensityFunction.constant(30.0)
    n = counts(lambda seed: simulate_inhomogeneous_poisson(UNIT, const, seed), 10000)
    assert within_3_sigma(n, 30.0, 30.0)


def test_linear_intensity_half_counts():
    lam = IntensityFunction.from_callable(lambda p: 100.0 * p[:, 0], 100.0)
    left, right = [], []
    for s in range(10000):
        p = simulate_inhomogeneous_poisson(UNIT, lam, seed=s)
        left.append(count(p, LEFT))
        right.append(count(p, RIGHT))
    assert within_3_sigma(np.array(left), 12.5, 12.5)
    assert within_3_sigma(np.array(right), 37.5, 37.5)


def test_disjoint_counts_uncorrelated():
    a, b = [], []
    for s in range(10000):
        p = simulate_homogeneous_poisson(UNIT, 40, seed=s)
        a.append(count(p, Window.box([0, 0], [0.4, 1])))
        b.append(count(p, Window.box([0.6, 0], [1, 1])))
    assert abs(np.corrcoef(a, b)[0, 1]) <= 0.03


def test_superposition():
    n = np.array([simulate_homogeneous_poisson(UNIT, 20, seed=2 * s).n
                  + simulate_homogeneous_poisson(UNIT, 15, seed=2 * s + 1).n for s in range(5000)])
    assert within_3_sigma(n, 35.0, 35.0)


def test_lgcp_degenerate_is_poisson():
    grid = tessellate_baus(UNIT, 5)
    model = CovarianceModel("exponential", 1e-12, 0.2, 0)
    n = counts(lambda seed: simulate_lgcp(UNIT, grid, np.log(50), model, seed)[0], 10000)
    assert within_3_sigma(n, 50.0, 50.0)


def test_lgcp_lognormal_mean():
    grid = tessellate_baus(UNIT, 10)
    sigma2, m = 0.5, np.log(30.0)
    model = CovarianceModel("exponential", sigma2, 0.2, 0)
    n = counts(lambda seed: simulate_lgcp(UNIT, grid, m, model, seed)[0], 10000)
    # standard error taken from the sample itself (overdispersed counts)
    assert abs(n.mean() - np.exp(m + sigma2 / 2)) <= 3 * n.std(ddof=1) / np.sqrt(n.size)


def test_lgcp_field_shape():
    grid = tessellate_baus(UNIT, 6)
    _, field = simulate_lgcp(UNIT, grid, 0.0, CovarianceModel("exponential", 1, 0.2), seed=3)
    assert field.shape == (36,)


def test_count_examples():
    empty = PointPattern(UNIT, np.empty((0, 2)))
    assert count(empty, UNIT) == 0
    p = PointPattern(UNIT, [[0.25, 0.25], [0.75, 0.75]])
    assert count(p, UNIT) == 2
    assert count(p, Window.box([0, 0], [0.5, 0.5])) == 1


def test_count_closed_boundary():
    p = PointPattern(UNIT, [[0.5, 0.5], [0.5, 0.2]])
    assert count(p, Window.box([0, 0], [0.5, 0.5])) == 2


def test_count_region_outside():
    p = PointPattern(UNIT, [[0.5, 0.5]])
    with pytest.raises(RegionOutsideWindow):
        count(p, Window.box([0.5, 0.5], [1.5, 1]))


def test_k_two_points():
    p = PointPattern(UNIT, [[0.4, 0.5], [0.5, 0.5]])
    k = estimate_k_function(p, [0.05, 0.2])
    assert k[0] == 0 and k[1] > 0


def test_k_errors():
    with pytest.raises(TooFewPoints):
        estimate_k_function(PointPattern(UNIT, [[0.5, 0.5]]), [0.1])
    p = PointPattern(UNIT, [[0.1, 0.1], [0.2, 0.2]])
    with pytest.raises(RadiusTooLarge):
        estimate_k_function(p, [0.1, 0.3])


def test_k_translation_weights_by_hand():
    # weights |W| / ((w - |dx|)(h - |dy|)) for the single pair
    p = PointPattern(Window.box([0, 0], [2, 1]), [[0.5, 0.5], [0.6, 0.4]])
    k = estimate_k_function(p, [0.2])
    w = 2.0 / ((2 - 0.1) * (1 - 0.1))
    assert abs(k[0] - 2.0 * 2 * w / 2) < 1e-12


def test_k_polygon_matches_box_route(rng):
    # a square given as a polygon takes the generic overlap route
    pts = rng.random((40, 2))
    box = PointPattern(UNIT, pts)
    poly = PointPattern(Window.polygon([(0, 0), (1, 0), (1, 1), (0, 1)]), pts)
    r = [0.05, 0.1, 0.2]
    np.testing.assert_allclose(estimate_k_function(poly, r), estimate_k_function(box, r), rtol=1e-12)


@given(st.integers(0, 10 ** 6))
def test_k_nondecreasing(seed):
    p = simulate_homogeneous_poisson(UNIT, 60, seed=seed)
    if p.n < 2:
        return
    k = estimate_k_function(p, np.linspace(0.01, 0.25, 12))
    assert np.all(np.diff(k) >= 0)


def test_k_under_csr():
    r = np.array([0.05, 0.1])
    ks = np.array([estimate_k_function(simulate_homogeneous_poisson(UNIT, 100, seed=s), r)
                   for s in range(500)])
    assert np.all(np.abs(ks.mean(axis=0) / (np.pi * r ** 2) - 1) <= 0.10)


def test_k_clustered_copy_exceeds_csr():
    hits = 0
    for s in range(200):
        base = simulate_homogeneous_poisson(Window.box([0, 0], [0.98, 0.98]), 50, seed=s)
        pts = np.vstack([base.points, base.points + 0.01])
        p = PointPattern(UNIT, pts)
        hits += estimate_k_function(p, [0.02])[0] > np.pi * 0.02 ** 2
    assert hits >= 190


def test_csr_preconditions():
    p = simulate_homogeneous_poisson(UNIT, 50, seed=1)
    with pytest.raises(TooFewSimulations):
        csr_test(p, 19, seed=1)
    with pytest.raises(TooFewPoints):
        csr_test(PointPattern(UNIT, p.points[:4]), 99, seed=1)


def test_csr_p_value_resolution():
    p = simulate_homogeneous_poisson(UNIT, 50, seed=1)
    res = csr_test(p, 39, seed=2)
    assert res.p_value * 40 == pytest.approx(round(res.p_value * 40))
    assert 1 / 40 <= res.p_value <= 1


@pytest.mark.parametrize("statistic", ["k-deviation", "quadrat-chi2"])
def test_csr_size(statistic):
    rej = sum(csr_test(simulate_homogeneous_poisson(UNIT, 100, seed=s), 99, seed=10 ** 6 + s,
                       statistic=statistic).p_value <= 0.05 for s in range(500))
    assert 0.03 <= rej / 500 <= 0.07


def test_csr_power_against_lgcp():
    cfg = json.loads(open(os.path.join(FIXTURES, "csr_power_pilot.json")).read())
    grid = tessellate_baus(UNIT, cfg["grid"])
    model = CovarianceModel(cfg["gp_family"], cfg["gp_variance"], cfg["gp_range"], 0)
    rej = 0
    for s in range(200):
        p, _ = simulate_lgcp(UNIT, grid, np.log(100) - 1, model, seed=s)
        rej += p.n >= 5 and csr_test(p, cfg["n_sim"], seed=10 ** 6 + s).p_value <= cfg["alpha"]
    assert rej / 200 >= cfg["required_rejection_rate"]


def test_marks_round_trip(rng):
    p = simulate_homogeneous_poisson(UNIT, 30, seed=3)
    back = p.with_marks(rng.random(p.n)).without_marks()
    assert np.array_equal(back.points, p.points) and back.marks is None


def test_csv_round_trip(tmp_path, rng):
    p = simulate_homogeneous_poisson(Window.box([1, 2], [3, 5]), 5, seed=3).with_marks(None)
    p = p.with_marks(rng.random(p.n))
    p.to_csv(tmp_path / "p.csv")
    q = read_pattern_csv(tmp_path / "p.csv")
    # text output keeps 12 significant digits
    np.testing.assert_allclose(q.points, p.points, rtol=1e-11)
    np.testing.assert_allclose(q.marks, p.marks, rtol=1e-11)
    assert q.window.volume == p.window.volume
