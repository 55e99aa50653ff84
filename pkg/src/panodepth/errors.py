"""Exception types.

Every error carries a short machine-readable ``code`` that the CLI prints as
the prefix of its one-line failure message.
"""


class PanoDepthError(Exception):
    code = "error"


class DomainError(PanoDepthError, ValueError):
    code = "domain"


class GeometryError(PanoDepthError):
    code = "geometry"


class CoverageError(PanoDepthError):
    code = "coverage"


class ConfigError(PanoDepthError, ValueError):
    code = "config"


class InsufficientSamplesError(PanoDepthError):
    code = "insufficient-samples"


class DegenerateFitError(PanoDepthError):
    code = "degenerate-fit"


class AssemblyError(PanoDepthError):
    code = "assembly"


class NumericError(PanoDepthError, ArithmeticError):
    code = "numeric"


class ScalingError(PanoDepthError):
    code = "scaling"


class MetricsError(PanoDepthError):
    code = "metrics"


class FormatError(PanoDepthError):
    code = "format"

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte {offset})"
        super().__init__(message)
        self.offset = offset


class MissingFileError(PanoDepthError, FileNotFoundError):
    code = "missing-file"
