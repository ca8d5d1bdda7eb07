"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """Malformed or out-of-range argument (dimension mismatch, negative scale, ...)."""


class PreconditionError(ValueError):
    """A documented precondition failed; the message names the violated inequality."""


class TruncationError(PreconditionError):
    """A tCDP budget's truncation order is too small for the requested conversion."""


class NoPrivacyError(PreconditionError):
    """A noise scale of zero was requested for a mechanism with nonzero sensitivity."""


class CalibrationError(RuntimeError):
    """Self-certification of a calibrated noise scale failed."""


class SolverError(RuntimeError):
    """A numerical solve did not converge to the required accuracy."""
