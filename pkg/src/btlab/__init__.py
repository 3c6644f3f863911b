"""Minkowski tensors of planar Boolean models with anisotropically rotated grains."""

__version__ = "0.1.0"

from .analytic import ModelParams, grain_analytics
from .geom2d import ConvexPolygon, Ellipse, PolygonGrain, Rectangle, TorusWindow
from .sampler import SimulationConfig, simulate_batch
from .tensor import SymTensor2

__all__ = [
    "__version__",
    "ConvexPolygon",
    "Ellipse",
    "ModelParams",
    "PolygonGrain",
    "Rectangle",
    "SimulationConfig",
    "SymTensor2",
    "TorusWindow",
    "grain_analytics",
    "simulate_batch",
]
