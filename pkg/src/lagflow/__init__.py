"""Lagrangian mean curvature flow of graphs of area-preserving torus maps."""

from .flow import FlowState, StepControl, run, step_rk4
from .geometry import build_geometry, integrate
from .tensoralg import DomainError, Metric2, SymTensor3, norms
from .torusmap import Shear, TorusMap, TrigPoly, det_drift, jacobian, make_shear_composition

__all__ = [
    "DomainError",
    "FlowState",
    "Metric2",
    "Shear",
    "StepControl",
    "SymTensor3",
    "TorusMap",
    "TrigPoly",
    "build_geometry",
    "det_drift",
    "integrate",
    "jacobian",
    "make_shear_composition",
    "norms",
    "run",
    "step_rk4",
]

__version__ = "0.1.0"
