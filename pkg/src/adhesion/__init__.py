"""Matter evolution in the inviscid limit of the potential Burgers equation.

Limit potentials, the discontinuous limit velocity field given by minimal
enclosing balls of momentum sets, adhesion trajectories, planar shock
geometry and an exact viscous reference solution.
"""

from .convex_core import Ball, MomentumSet, circumcenter, min_enclosing_ball
from .fourier import FourierSeries
from .limit_potential import (
    A3EndpointModel,
    AffineBranch,
    FiniteMinFamily,
    HopfLaxPotential,
    LocalLinearModel,
    QuadraticBranch,
    active_momenta,
    limit_velocity,
)
from .shock_geometry import classify_configuration, classify_node, detect_cluster_events, shock_diagram
from .trajectory import LimitTrajectory, backward_reachability, forward_uniqueness_check, integrate
from .viscous import ViscousSolution

__version__ = "0.1.0"

__all__ = [
    "A3EndpointModel",
    "AffineBranch",
    "Ball",
    "FiniteMinFamily",
    "FourierSeries",
    "HopfLaxPotential",
    "LimitTrajectory",
    "LocalLinearModel",
    "MomentumSet",
    "QuadraticBranch",
    "ViscousSolution",
    "active_momenta",
    "backward_reachability",
    "circumcenter",
    "classify_configuration",
    "classify_node",
    "detect_cluster_events",
    "forward_uniqueness_check",
    "integrate",
    "limit_velocity",
    "min_enclosing_ball",
    "shock_diagram",
]
