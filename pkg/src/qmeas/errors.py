"""Exception hierarchy shared by all qmeas modules."""

from __future__ import annotations


class QmeasError(Exception):
    """Base class for all qmeas errors."""


class ValidationError(QmeasError):
    """An input value violates a type invariant or precondition."""


class DimensionMismatchError(ValidationError):
    """Operands live in Hilbert spaces of different dimension."""


class ResolutionMismatchError(QmeasError):
    """Measurement strength, readout value and time step are incompatible.

    Raised when kappa * (||A|| + |a|)**2 * dt exceeds the trust threshold of
    the per-step propagator: the readout grid is too coarse to resolve the
    requested measurement strength.
    """


class IntegrationError(QmeasError):
    """A numerical integration left its validity domain (positivity loss,
    norm blow-up, non-finite values)."""


class QuadratureError(QmeasError):
    """A readout quadrature failed to converge with increasing order."""


class RecordParseError(ValidationError):
    """A serialized readout record is malformed.

    Attributes
    ----------
    row : int | None
        1-based data row at which parsing failed, when known.
    """

    def __init__(self, message: str, row: int | None = None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row


class ConfigError(QmeasError):
    """A run configuration is invalid.

    Attributes
    ----------
    line : int | None
        1-based line number in the config text, when known.
    """

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
