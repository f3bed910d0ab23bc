"""Exception hierarchy shared by every tubefit module."""


class TubeFitError(Exception):
    """Base class for all errors raised by tubefit."""


class PreconditionError(TubeFitError, ValueError):
    """An input violates a documented precondition."""


class DomainError(TubeFitError, ValueError):
    """An argument lies outside the domain of the operation."""


class DegenerateFitError(TubeFitError):
    """A least-squares design or a point cloud carries no usable spread."""


class InsufficientDataError(TubeFitError):
    """Too few observations for the requested degrees of freedom."""


class SingularTangentError(TubeFitError):
    """The curve gradient vanishes, so no tangent direction exists."""


class EmptyNeighborhoodError(TubeFitError):
    """A t-window holds too few points to estimate a cross section."""


class DegenerateCovarianceError(TubeFitError):
    """A fitted 2D covariance is not positive definite."""

    def __init__(self, message, t0=None):
        if t0 is not None:
            message = f"{message} (t0={t0:.6g})"
        super().__init__(message)
        self.t0 = t0


class DegenerateWeightsError(TubeFitError):
    """All raw window weights vanished."""


class TubeFitFailedError(TubeFitError):
    """More than half of the cross sections along a tube failed."""


class ExportError(TubeFitError):
    """A surface mesh cannot be built from the available sections."""


class InputError(TubeFitError):
    """Input data is missing or unusable (e.g. empty after thresholding)."""


class ParseError(InputError):
    """A file could not be parsed."""

    def __init__(self, message, path=None, line=None):
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)
        self.path = path
        self.line = line


class UnsupportedVersionError(ParseError):
    """A serialized document carries a version this release cannot read."""
