"""Numerical verification of Einstein warped products over conformally flat bases."""

__version__ = "0.1.0"

from .chart import Direction, ProfileFunction, SampleGrid, ScalarField, Signature, kappa, sample_grid, xi_coordinate
from .curvature import MetricField, christoffel, curvature, ricci, scalar_curvature
from .warp import (
    FiberDescriptor,
    ResidualReport,
    WarpedProductSpec,
    assemble_warped_metric,
    einstein_residual,
    oneill_residuals,
    scalar_identities,
)

__all__ = [
    "Direction",
    "FiberDescriptor",
    "MetricField",
    "ProfileFunction",
    "ResidualReport",
    "SampleGrid",
    "ScalarField",
    "Signature",
    "WarpedProductSpec",
    "assemble_warped_metric",
    "christoffel",
    "curvature",
    "einstein_residual",
    "kappa",
    "oneill_residuals",
    "ricci",
    "sample_grid",
    "scalar_curvature",
    "scalar_identities",
    "xi_coordinate",
]
