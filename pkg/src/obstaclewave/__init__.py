"""Numerical companion for boundary-data stability of the exterior wave
equation on a Riemannian annulus: geometry, forward solver, Carleman and
energy checks, Hölder-stability harness and adjoint-based reconstruction."""
from .domain import AnnularMesh, SpaceTimeField, TimeGrid, build_annulus_mesh
from .errors import ObstacleWaveError
from .geometry import MetricField, make_metric
from .weight import CarlemanParams, WeightFunction, carleman_params, geometric_constants, make_weight

__version__ = "0.1.0"

__all__ = ["AnnularMesh", "SpaceTimeField", "TimeGrid", "build_annulus_mesh", "ObstacleWaveError",
           "MetricField", "make_metric", "CarlemanParams", "WeightFunction", "carleman_params",
           "geometric_constants", "make_weight"]
