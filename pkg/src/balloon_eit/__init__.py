"""Balloon-catheter EIT: phantom meshing, CEM forward modelling, protocol
sweeps and conductivity image reconstruction."""

from .errors import (BalloonEitError, ConfigError, DegenerateImageError,
                     ExperimentError, GeometryError, MeshingError,
                     ParameterError, ProtocolMismatchError, SolverError)
from .fem import ConductivityField, FemSystem, Frame
from .geometry import BalloonBoundary, CatheterSpec, LumenProfile, circle, ellipse
from .meshing import Mesh, build_cross_section, build_mesh, extrude_mesh, mesh_quality
from .noise import NoiseModel, add_noise, detection_threshold
from .protocols import Protocol, full_protocol, radial_protocol, validate_protocol

__version__ = "0.1.0"
