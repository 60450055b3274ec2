"""Exception hierarchy shared by all pipeline stages."""


class VesselPoseError(Exception):
    """Base class for all package-specific errors."""


class RasterFormatError(VesselPoseError):
    """Raised for unreadable, malformed or zero-sized raster files."""


class DegenerateInputError(VesselPoseError):
    """Raised when a geometric operation receives too few distinct points."""


class TrajectoryNotFoundError(VesselPoseError):
    """Raised when no robot trajectory candidate exists in a frame."""


class PhantomSpecError(VesselPoseError):
    """Raised when a phantom specification violates its own constraints."""


class InsufficientDataError(VesselPoseError):
    """Raised by statistics that need more samples than were given."""


class UndefinedCorrelationError(VesselPoseError):
    """Raised when a correlation coefficient is undefined (constant series)."""


class ConfigError(VesselPoseError):
    """Raised for invalid or unknown pipeline configuration values."""
