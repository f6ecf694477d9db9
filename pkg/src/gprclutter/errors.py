"""Exception hierarchy.

The CLI maps these onto exit codes: configuration problems exit 1,
numerical or invariant failures exit 2, I/O and format problems exit 3.
"""


class GprClutterError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(GprClutterError, ValueError):
    """Invalid configuration: bad values, unknown keys, missing scenarios."""


class DomainError(GprClutterError, ValueError):
    """Constitutive evaluation left its admissible parameter domain."""


class SingularBackgroundError(DomainError):
    """Background permittivity vanished where a sensitivity is needed."""


class NearSingularityError(GprClutterError, ValueError):
    """Source and evaluation points closer than the kernel's minimum separation."""


class AssemblyError(GprClutterError, RuntimeError):
    """Forward-matrix assembly produced a non-finite entry."""


class NonPositiveDefiniteError(GprClutterError, RuntimeError):
    """Cholesky factorization failed on a covariance factor."""


class SizeCapError(GprClutterError, RuntimeError):
    """Refused to materialize a matrix above the configured size cap."""


class UndefinedSpectrumError(GprClutterError, ValueError):
    """Spectral metrics requested for a zero (or invalid) covariance."""


class InvariantError(GprClutterError, RuntimeError):
    """A structural invariant (Hermitian symmetry, PSD, ...) was violated."""


class FormatError(GprClutterError, ValueError):
    """Malformed binary matrix file. Carries the failing byte offset."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset
