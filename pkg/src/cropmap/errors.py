"""Exception types shared across the pipeline.

Exit-code mapping used by the CLI: config problems -> 2, data problems -> 3,
numeric divergence -> 4.
"""


class CropmapError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class ConfigError(CropmapError):
    """Invalid or inconsistent configuration."""

    exit_code = 2


class DataError(CropmapError):
    """Invalid input data."""

    exit_code = 3


class AllMasked(DataError):
    """Every observation was flagged as noise."""


class TooFewObservations(DataError):
    """Not enough valid observations for the requested reconstruction."""


class SingularSystem(CropmapError):
    """Smoother linear system could not be solved (defensive; lambda > 0 keeps it regular)."""

    exit_code = 4


class MissingBand(DataError):
    """A required spectral or SAR channel is absent."""


class MalformedHistory(DataError):
    """Crop history row does not have exactly eight yearly entries."""


class ZeroDenominator(DataError):
    """Trusted-ratio denominator (CDL corn + soy count) is zero."""


class EmptySequence(DataError):
    """DTW input sequence has no elements."""


class TooFewSamples(DataError):
    """Not enough samples for the requested analysis or split."""


class ShapeMismatch(CropmapError):
    """Tensor or feature shapes are inconsistent."""

    exit_code = 3


class InvalidTarget(DataError):
    """Class index out of range for the loss."""


class NotScalar(CropmapError):
    """backward() requires a scalar loss tensor."""


class EmptyTrainSet(DataError):
    """Training split contains no samples."""


class NonFiniteLoss(CropmapError):
    """Training loss diverged to NaN or infinity."""

    exit_code = 4


class FingerprintMismatch(DataError):
    """Model preprocessing fingerprint does not match the offered dataset."""


class UnsupportedModelKind(ConfigError):
    """Operation not defined for this model kind (e.g. fine-tuning a forest)."""


class EmptyClass(DataError):
    """A class required by the operation has no samples."""


class InsufficientSamples(DataError):
    """Domain pool too small for the requested composition."""


class InvalidSpec(ConfigError):
    """Synthetic generator specification is inconsistent."""


class LengthMismatch(DataError):
    """Prediction and truth vectors differ in length."""


class TooFewValues(DataError):
    """Trimmed mean needs at least three fold values."""
