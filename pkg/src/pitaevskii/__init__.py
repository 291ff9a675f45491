"""Pseudo-spectral simulator and verification harness for the Pitaevskii
two-fluid model: a nonlinear Schrodinger wavefunction coupled to the
inhomogeneous incompressible Navier-Stokes equations on a periodic torus."""

from .grid import Grid, GridError, make_grid
from .model import BlowUp, DensityFloorViolation, Params, State
from .norms import NormSpec, inner_product, norm
from .spectral import SpectralPlan, plan_for

__version__ = "0.1.0"

__all__ = [
    "Grid",
    "GridError",
    "make_grid",
    "Params",
    "State",
    "BlowUp",
    "DensityFloorViolation",
    "NormSpec",
    "norm",
    "inner_product",
    "SpectralPlan",
    "plan_for",
    "__version__",
]
