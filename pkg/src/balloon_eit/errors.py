"""Exception types shared across the toolkit."""


class BalloonEitError(Exception):
    """Base class for all toolkit errors."""


class ParameterError(BalloonEitError, ValueError):
    """A physical or numerical parameter violates its constraints."""


class GeometryError(BalloonEitError):
    """A lumen/catheter geometry is degenerate or inconsistent."""


class MeshingError(BalloonEitError):
    """Mesh generation failed or produced an invalid mesh."""


class SolverError(BalloonEitError):
    """A linear or nonlinear solve did not converge.

    Carries the final residual when available.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ProtocolMismatchError(BalloonEitError):
    """Frames or protocols that must match do not."""


class DegenerateImageError(BalloonEitError):
    """An image-derived quantity is undefined (e.g. every element thresholded away)."""


class ConfigError(BalloonEitError):
    """An experiment configuration file is malformed or incomplete."""


class ExperimentError(BalloonEitError):
    """A scenario stage failed; carries the partial artifact manifest."""

    def __init__(self, stage, message, manifest=None):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
        self.manifest = list(manifest or [])
