import numpy as np
import pytest
from hypothesis import given, strategies as st

from spatialstat.core import Window, build_dataset, tessellate_baus
from spatialstat.covariance import CovarianceModel, gram_matrix
from spatialstat.errors import GridTooCoarse, NotPositiveDefinite
from spatialstat.kriging import simple_kriging
from spatialstat.multivariate import (
    BivariateModel,
    CrossCovarianceSet,
    InteractionKernel,
    cokrige,
    derive_cross_covariances,
    joint_covariance_matrix,
)

UNIT = Window.unit_square()
C11 = CovarianceModel("exponential", 1.0, 0.5, 0.0)
C2G1 = CovarianceModel("exponential", 0.5, 0.3, 0.0)


def model(kernel, res=12, mean1=0.0, mean2=0.0, c11=C11, c2g1=C2G1):
    return BivariateModel(mean1, mean2, c11, c2g1, kernel, tessellate_baus(UNIT, res))


def random_smooth_kernel(rng):
    shift = rng.uniform(-0.2, 0.2, 2)
    return InteractionKernel.gaussian(rng.uniform(-3, 3), rng.uniform(0.01, 0.2), shift)


def test_grid_too_coarse():
    with pytest.raises(GridTooCoarse):
        model(InteractionKernel.zero(), res=3)


def test_zero_kernel_blocks(rng):
    loc = rng.random((8, 2))
    cc = derive_cross_covariances(model(InteractionKernel.zero()), loc)
    assert not cc.c12.any() and not cc.c21.any()
    np.testing.assert_array_equal(cc.c22, gram_matrix(C2G1, loc))


def test_zero_kernel_identical_blocks(rng):
    loc = rng.random((6, 2))
    cc = derive_cross_covariances(model(InteractionKernel.zero(), c2g1=C11), loc)
    joint = joint_covariance_matrix(cc)
    np.testing.assert_array_equal(joint[:6, :6], joint[6:, 6:])
    assert not joint[:6, 6:].any()
    assert np.linalg.eigvalsh(joint)[0] > 0


def test_local_average_limit():
    beta = 0.7
    loc = np.random.default_rng(8).random((10, 2))
    grid = tessellate_baus(UNIT, 32)
    m = BivariateModel(0.0, 0.0, C11, C2G1, InteractionKernel.local_average(beta, grid), grid)
    cc = derive_cross_covariances(m, loc)
    target = beta * gram_matrix(C11, loc)
    assert np.max(np.abs(cc.c12 - target) / target) < 0.05


def test_local_average_refinement_sequence():
    beta = 0.7
    loc = np.random.default_rng(8).random((10, 2))
    target = beta * gram_matrix(C11, loc)
    errs = []
    for res in (8, 16, 32):
        grid = tessellate_baus(UNIT, res)
        m = BivariateModel(0.0, 0.0, C11, C2G1, InteractionKernel.local_average(beta, grid), grid)
        errs.append(np.max(np.abs(derive_cross_covariances(m, loc).c12 - target) / target))
    assert errs[0] > errs[1] > errs[2]


def test_asymmetric_fixture():
    kernel = InteractionKernel.gaussian(1.0, 0.02, (0.2, 0.0))
    loc = np.array([[0.3, 0.5], [0.5, 0.5], [0.7, 0.5], [0.5, 0.3]])
    cc = derive_cross_covariances(model(kernel, res=32), loc)
    assert np.max(np.abs(cc.c12 - cc.c21)) > 0.01


def test_symmetric_kernel_symmetric_cross():
    kernel = InteractionKernel.gaussian(1.0, 0.005)
    loc = np.array([[0.4, 0.5], [0.5, 0.45], [0.6, 0.55]])
    cc = derive_cross_covariances(model(kernel, res=64), loc)
    assert np.max(np.abs(cc.c12 - cc.c21)) < 1e-3 * np.max(np.abs(cc.c12))


@given(st.integers(0, 10 ** 6))
def test_transpose_identity(seed):
    rng = np.random.default_rng(seed)
    cc = derive_cross_covariances(model(random_smooth_kernel(rng), res=8), rng.random((7, 2)))
    np.testing.assert_allclose(cc.c12, cc.c21.T, atol=1e-10)


@given(st.integers(0, 10 ** 6))
def test_c22_diagonal_dominates_conditional(seed):
    rng = np.random.default_rng(seed)
    loc = rng.random((6, 2))
    cc = derive_cross_covariances(model(random_smooth_kernel(rng), res=8), loc)
    assert np.all(np.diag(cc.c22) >= np.diag(gram_matrix(C2G1, loc)) - 1e-12)


def test_joint_validity_random_kernels():
    rng = np.random.default_rng(21)
    for _ in range(20):
        loc = rng.random((10, 2))
        joint = joint_covariance_matrix(derive_cross_covariances(model(random_smooth_kernel(rng)), loc))
        assert np.linalg.eigvalsh(joint)[0] >= -1e-8 * np.max(np.diag(joint))


def test_refinement_convergence():
    kernel = InteractionKernel.gaussian(1.5, 0.05, (0.1, -0.05))
    loc = np.array([[0.3, 0.4], [0.6, 0.6], [0.45, 0.7]])
    sets = [derive_cross_covariances(model(kernel, res=r), loc) for r in (8, 16, 32)]
    for name in ("c12", "c22"):
        d1 = np.max(np.abs(getattr(sets[1], name) - getattr(sets[0], name)))
        d2 = np.max(np.abs(getattr(sets[2], name) - getattr(sets[1], name)))
        assert d2 / d1 < 0.6


def test_corrupted_cross_block_rejected(rng):
    loc = rng.random((10, 2))
    grid = tessellate_baus(UNIT, 8)
    m = BivariateModel(0.0, 0.0, C11, CovarianceModel("exponential", 0.01, 0.3),
                       InteractionKernel.local_average(2.0, grid), grid)
    cc = derive_cross_covariances(m, loc)
    joint_covariance_matrix(cc)
    bad = CrossCovarianceSet(cc.c11, 2 * cc.c12, 2 * cc.c21, cc.c22)
    with pytest.raises(NotPositiveDefinite) as exc:
        joint_covariance_matrix(bad)
    assert exc.value.min_eigenvalue < 0


def test_cokrige_only_first_variable_is_simple_kriging(rng):
    ds = build_dataset(rng.random((9, 2)), rng.standard_normal(9) + 2.0)
    m = model(random_smooth_kernel(rng), mean1=2.0)
    s0 = np.array([0.4, 0.6])
    res = cokrige(m, ds, None, 1, s0, noise=(0.1, 0.0))
    ref = simple_kriging(ds, C11, 2.0, s0, measurement_noise=0.1)
    assert abs(res.prediction[0] - ref.predictor) < 1e-10
    assert abs(res.variance[0] - ref.kriging_variance) < 1e-10


def test_cokrige_zero_kernel_target_two(rng):
    ds = build_dataset(rng.random((9, 2)), rng.standard_normal(9))
    m = model(InteractionKernel.zero(), mean2=[1.0, 0.5, -0.5])
    s0 = np.array([0.2, 0.8])
    res = cokrige(m, ds, None, 2, s0)
    assert abs(res.prediction[0] - (1.0 + 0.1 - 0.4)) < 1e-12
    assert abs(res.variance[0] - C2G1.total_variance) < 1e-12


def test_cokrige_more_data_never_hurts():
    rng = np.random.default_rng(17)
    for _ in range(20):
        m = model(random_smooth_kernel(rng), res=8)
        d1 = build_dataset(rng.random((8, 2)), rng.standard_normal(8))
        d2 = build_dataset(rng.random((6, 2)), rng.standard_normal(6))
        s0 = rng.random(2)
        both = cokrige(m, d1, d2, 2, s0, noise=0.05).variance[0]
        alone = cokrige(m, None, d2, 2, s0, noise=0.05).variance[0]
        assert both <= alone + 1e-12


def test_cross_covariance_csv(tmp_path, rng):
    cc = derive_cross_covariances(model(random_smooth_kernel(rng), res=4), rng.random((3, 2)))
    cc.to_csv(tmp_path)
    assert (tmp_path / "manifest.txt").read_text().startswith("locations: 3")
    back = np.loadtxt(tmp_path / "c21.csv", delimiter=",")
    np.testing.assert_allclose(back, cc.c21, rtol=1e-11, atol=1e-300)
