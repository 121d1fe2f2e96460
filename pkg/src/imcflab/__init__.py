"""Inverse mean curvature flow of star-shaped graphs in hyperbolic space."""

from .errors import (
    CertificationFailure,
    ConfigError,
    DomainError,
    FlowBreakdown,
    ImcfError,
    InputError,
    InsufficientData,
    NotConverged,
    StepRejected,
)
from .geometry import GraphSurface, geometry_report
from .sphere import SphereField, SphereGrid

__version__ = "0.1.0"

__all__ = [
    "CertificationFailure",
    "ConfigError",
    "DomainError",
    "FlowBreakdown",
    "GraphSurface",
    "ImcfError",
    "InputError",
    "InsufficientData",
    "NotConverged",
    "SphereField",
    "SphereGrid",
    "StepRejected",
    "geometry_report",
]
