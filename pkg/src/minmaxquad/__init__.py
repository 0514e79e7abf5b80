"""Integrals of functions of the minimum and maximum of several variables.

The reducer turns an n-dimensional integral over a cube into 1-D or 2-D
quadrature; aggregation and probability build orness/idempotency measures
and expectations of min-max functionals on top of it, and the oracle
checks everything by brute force.
"""

from .quadrature import (
    DEFAULT_TOLERANCE,
    Interval,
    QuadResult,
    Tolerance,
    ToleranceNotReached,
    integrate_1d,
    integrate_nested,
    integrate_triangle,
    transform_unbounded,
)
from .reduction import (
    ClosedKernel,
    GeneralFullIntegrand,
    MaxIntegrand,
    MinIntegrand,
    MonteCarlo,
    SymmetricFullIntegrand,
    TensorGrid,
    integrate_max,
    integrate_min,
    integrate_minmax_full,
    integrate_minmax_general,
    integrate_minmax_pair,
    min_subset_integral,
    variance_range_average,
)
from .aggregation import (
    SetFunction,
    global_idempotency,
    global_orness,
    global_orness_choquet,
    idempotency_average_numeric,
    orness_average_choquet,
    orness_average_geometric,
    orness_average_numeric,
)
from .probability import (
    Distribution,
    cdf_of_functional,
    expect_minmax_exponential,
    expect_minmax_hetero,
    expect_minmax_iid,
    exponential,
    relative_range_cdf,
    relative_range_moment,
    uniform,
)
from .oracle import McEstimate, mc_cube, mc_expect, tensor_cube

__version__ = "0.1.0"
