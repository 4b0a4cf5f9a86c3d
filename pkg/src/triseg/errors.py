"""Exception types shared across the pipeline."""


class TrisegError(Exception):
    """Base class for all triseg errors."""


class NiftiFormatError(TrisegError, ValueError):
    """Malformed NIfTI-1 file; the message names the offending header field."""


class UnsupportedDtypeError(NiftiFormatError):
    """NIfTI datatype code outside the supported scalar set."""


class DimensionalityError(NiftiFormatError):
    """Volume is not a single 3D frame."""


class GeometryError(TrisegError, ValueError):
    """Crop window and slice geometry are inconsistent."""


class ShapeError(TrisegError, ValueError):
    """Array shapes incompatible with the requested operation."""


class TransferError(TrisegError, ValueError):
    """Weight transfer failed; the message identifies the mapped layer."""


class ConfigurationError(TrisegError, ValueError):
    """Invalid or infeasible configuration values."""


class DivergenceError(TrisegError, RuntimeError):
    """Training loss became non-finite; the message names the epoch."""
