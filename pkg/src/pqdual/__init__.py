"""Dual and (p,q)-mixed quermassintegrals, their curvature measures, and the
discrete Minkowski problem for (p,q)-dual mixed curvature measures."""

__version__ = "0.1.0"

from .geometry import (  # noqa: E402
    Ball,
    Ellipsoid,
    HPolytope,
    LinearImage,
    Polar,
    PolytopeV,
    RadialScale,
    SlabBody,
    StarIntersection,
    StarUnion,
    apply_linear,
    convex_hull_of_radial,
    lp_combination,
    norm_Q,
    polar,
    radial_eval,
    radial_gauss,
    support_eval,
    wulff_shape,
)
from .measures import DiscreteSphericalMeasure, MeasureParams  # noqa: E402
from .quermass import dual_quermass, pq_mixed_quermass  # noqa: E402

__all__ = [
    "Ball", "Ellipsoid", "HPolytope", "LinearImage", "Polar", "PolytopeV", "RadialScale",
    "SlabBody", "StarIntersection", "StarUnion", "apply_linear", "convex_hull_of_radial",
    "lp_combination", "norm_Q", "polar", "radial_eval", "radial_gauss", "support_eval",
    "wulff_shape", "DiscreteSphericalMeasure", "MeasureParams", "dual_quermass",
    "pq_mixed_quermass",
]
