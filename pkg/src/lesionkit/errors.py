"""Exception hierarchy shared across the toolkit."""


class LesionKitError(Exception):
    """Base class for all domain errors; CLI maps these to exit code 1."""

    code = "error"


class AlignmentError(LesionKitError):
    """Two grids that must share a shape (or two lists a length) do not."""

    code = "alignment"


class SchemaError(LesionKitError):
    """A report, config, or payload does not match its schema."""

    code = "schema"


class EmptyAnnotationError(LesionKitError):
    """A ground-truth mask has no foreground voxels."""

    code = "empty_annotation"


class ParameterError(LesionKitError):
    """A numeric or categorical parameter is out of its legal range."""

    code = "parameter"


class NumericError(LesionKitError):
    """Non-finite values where finite ones are required."""

    code = "numeric"


class BoundsError(LesionKitError):
    """A coordinate falls outside the volume or feature grid."""

    code = "bounds"


class NotFoundError(LesionKitError):
    """A referenced case, session, or file does not exist."""

    code = "not_found"


class VersionError(LesionKitError):
    """Checkpoint schema version does not match this build."""

    code = "version"
