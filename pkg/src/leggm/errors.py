"""Exception hierarchy shared by every stage of the pipeline.

Two umbrella families matter to the command-line layer: ``DataError``
(bad files, manifests, configuration, protocol misuse -> exit code 3)
and ``NumericError`` (a solver genuinely failed -> exit code 4).
"""


class LeggmError(Exception):
    """Base class for all library errors."""


class DataError(LeggmError):
    """Invalid input data: payloads, manifests, configuration, parameters."""


class NumericError(LeggmError):
    """Numerical failure inside a linear-algebra routine."""


# --- imaging -----------------------------------------------------------------

class MalformedPayloadError(DataError):
    """Byte stream is not a well-formed image or feature/model file."""


class UnsupportedDepthError(DataError):
    """Image carries a bit depth other than 8-bit single/tri-channel."""


# --- kernels and grids -------------------------------------------------------

class DimensionMismatchError(DataError):
    """Operands have incompatible shapes."""


class NonPositiveSigmaError(DataError):
    pass


class EvenSizeError(DataError):
    """Kernel sizes must be odd so a centre tap exists."""


class IndexOutOfRangeError(DataError):
    """Scale or orientation index outside the configured bank."""


# --- descriptor --------------------------------------------------------------

class NonSquareFactorError(DataError):
    """Down-sampling factor p must be a perfect square."""


class IndivisibleDimsError(DataError):
    """sqrt(p) must divide both image dimensions."""


# --- subspace ----------------------------------------------------------------

class KeepTooLargeError(DataError):
    """Requested number of components exceeds what the data supports."""


class KTooLargeError(DataError):
    """Neighbourhood size k must satisfy 1 <= k < n."""


class SingularScatterError(NumericError):
    """Within-class scatter singular even after regularization."""


class SingularConstraintError(NumericError):
    """Graph-embedding constraint matrix singular even after regularization."""


class NotSPDError(NumericError):
    """Constraint matrix not positive definite after regularization."""


class ConvergenceFailureError(NumericError):
    """Eigensolver failed or residuals exceeded the accepted bound."""


# --- recognition -------------------------------------------------------------

class EmptyGalleryError(DataError):
    pass


class UnknownClaimedLabelError(DataError):
    """Verification claim names a subject absent from the gallery."""


# --- evaluation --------------------------------------------------------------

class EmptyPoolError(DataError):
    """ROC needs at least one genuine and one impostor score."""


class ProtocolViolationError(DataError):
    """Manifest mixes probe data into training, or roles are inconsistent."""


# --- configuration and I/O ---------------------------------------------------

class IoFailureError(DataError):
    pass


class ConfigParseError(DataError):
    """Malformed key=value line; message carries the line number."""


class UnknownKeyError(DataError):
    pass


class InvariantViolationError(DataError):
    """A configuration value breaks a documented invariant; names the field."""
