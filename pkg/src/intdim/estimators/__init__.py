"""Intrinsic-dimension estimators."""

from .api import (
    DEFAULTS,
    ESTIMATORS,
    MLE,
    EstimatorSpec,
    GeodesicID,
    GeoMLE,
    TwoNN,
    estimate,
    estimate_k_sweep,
)
from .geodesic import fit_sphere_density, geodesic_id
from .geomle import geomle
from .mle import MIN_ANCHORS, draw_anchors, mle_anchor, mle_global, mle_local
from .report import EstimateReport, MleParams, standard_error
from .twonn import twonn

__all__ = [
    "DEFAULTS",
    "ESTIMATORS",
    "MIN_ANCHORS",
    "MLE",
    "EstimateReport",
    "EstimatorSpec",
    "GeoMLE",
    "GeodesicID",
    "MleParams",
    "TwoNN",
    "draw_anchors",
    "estimate",
    "estimate_k_sweep",
    "fit_sphere_density",
    "geodesic_id",
    "geomle",
    "mle_anchor",
    "mle_global",
    "mle_local",
    "standard_error",
    "twonn",
]
