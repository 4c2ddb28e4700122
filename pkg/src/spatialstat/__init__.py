"""Spatial statistics engine.

Geostatistics (covariances, variograms, kriging), lattice CAR models, point
processes, bivariate fields, Vecchia approximations and linear space-time
dynamics. Hot loops run in a compiled extension when it is available; see
``spatialstat._accel.BACKEND``.
"""

from ._accel import BACKEND
from .core import (
    BauGrid,
    GaussianSpec,
    SpatialDataset,
    Window,
    build_dataset,
    gaussian_condition,
    gaussian_logpdf,
    read_dataset_csv,
    tessellate_baus,
)
from .covariance import (
    CovarianceModel,
    EmpiricalVariogram,
    covariance_at,
    cross_covariance,
    empirical_variogram,
    fit_variogram,
    gram_matrix,
    semivariogram_at,
)
from .kriging import (
    KrigingResult,
    KrigingSystem,
    TrendSpec,
    fit_mle,
    kriging_map,
    ordinary_kriging,
    simple_kriging,
    universal_kriging,
)
from .lattice import (
    CarModel,
    NeighborhoodGraph,
    build_grid_graph,
    car_loglik,
    car_predict,
    checkerboard_partition,
    homogeneous_car,
    sample_car,
    validate_car,
)
from .multivariate import (
    BivariateModel,
    InteractionKernel,
    cokrige,
    derive_cross_covariances,
    joint_covariance_matrix,
)
from .pointproc import (
    IntensityFunction,
    PointPattern,
    count,
    csr_test,
    estimate_k_function,
    simulate_homogeneous_poisson,
    simulate_inhomogeneous_poisson,
    simulate_lgcp,
)
from .spacetime import (
    STCovariance,
    StateSpaceModel,
    kalman_filter,
    kalman_forecast,
    kalman_smooth,
    simulate_dynamical,
    st_covariance_at,
)
from .vecchia import (
    build_vecchia_factor,
    order_locations,
    select_neighbors,
    vecchia_krige,
    vecchia_loglik,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BauGrid",
    "GaussianSpec",
    "SpatialDataset",
    "Window",
    "build_dataset",
    "gaussian_condition",
    "gaussian_logpdf",
    "read_dataset_csv",
    "tessellate_baus",
    "CovarianceModel",
    "EmpiricalVariogram",
    "covariance_at",
    "cross_covariance",
    "empirical_variogram",
    "fit_variogram",
    "gram_matrix",
    "semivariogram_at",
    "KrigingResult",
    "KrigingSystem",
    "TrendSpec",
    "fit_mle",
    "kriging_map",
    "ordinary_kriging",
    "simple_kriging",
    "universal_kriging",
    "CarModel",
    "NeighborhoodGraph",
    "build_grid_graph",
    "car_loglik",
    "car_predict",
    "checkerboard_partition",
    "homogeneous_car",
    "sample_car",
    "validate_car",
    "BivariateModel",
    "InteractionKernel",
    "cokrige",
    "derive_cross_covariances",
    "joint_covariance_matrix",
    "IntensityFunction",
    "PointPattern",
    "count",
    "csr_test",
    "estimate_k_function",
    "simulate_homogeneous_poisson",
    "simulate_inhomogeneous_poisson",
    "simulate_lgcp",
    "STCovariance",
    "StateSpaceModel",
    "kalman_filter",
    "kalman_forecast",
    "kalman_smooth",
    "simulate_dynamical",
    "st_covariance_at",
    "build_vecchia_factor",
    "order_locations",
    "select_neighbors",
    "vecchia_krige",
    "vecchia_loglik",
]
