"""Exception hierarchy.

ValidationError maps to CLI exit code 2, FileFormatError (and OS-level I/O
failures) to exit code 3, VerificationError to exit code 4.
"""


class CloakVitError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(CloakVitError):
    """Invalid argument, shape, or configuration."""


class KeyFormatError(ValidationError):
    """Secret key is not 32 octets / 64 hex characters."""


class FileFormatError(CloakVitError):
    """An input file is malformed (PNG, weights container, manifest)."""


class WeightsFormatError(FileFormatError):
    """Weights container violates the .vtw format."""


class BadMagicError(WeightsFormatError):
    """File does not start with the VTW1 magic."""


class UnsupportedVersionError(WeightsFormatError):
    """Container format version is not supported."""


class ShapeTableError(WeightsFormatError):
    """Tensor table disagrees with the configuration."""


class PayloadLengthError(WeightsFormatError):
    """Payload is shorter or longer than the tensor table requires."""


class NonFiniteWeightsError(WeightsFormatError):
    """A stored tensor contains NaN or infinity."""


class ManifestFormatError(FileFormatError):
    """Dataset manifest or mapping file is malformed."""


class VerificationError(CloakVitError):
    """An equivalence check failed."""
