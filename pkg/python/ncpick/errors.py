"""Exceptions raised by ncpick.

Every error carries a `data` payload with the numbers that triggered it, so
callers (and the CLI) can report them without parsing messages.
"""

from typing import Any, Optional


class NcPickError(Exception):
    """Base class of every error raised by ncpick."""

    def __init__(self, message: str, data: Optional[Any] = None):
        """Construct an error with a message and an optional structured payload."""
        super().__init__(message)
        self.data = data


class InvalidInputError(NcPickError):
    """The caller supplied data outside the domain of an operation."""


class NumericalError(NcPickError):
    """A computation could not be certified to the requested accuracy."""


class InvalidAlphabetError(InvalidInputError):
    """Alphabet size is not usable for the requested enumeration."""


class InvalidWordError(InvalidInputError):
    """A word contains a letter outside [1..N]."""


class EmptyWordError(InvalidInputError):
    """An operation needs a first letter but got the empty word."""


class ShapeError(InvalidInputError):
    """Matrix shapes do not conform."""


class NotHermitianError(InvalidInputError):
    """A matrix expected to be Hermitian is not, beyond tolerance."""


class NotInBallError(InvalidInputError):
    """A point does not lie strictly inside the operator unit ball."""


class DuplicatePointsError(InvalidInputError):
    """Interpolation nodes are not pairwise distinct."""


class TruncationExceededError(InvalidInputError):
    """A level beyond the stored truncation degree was requested."""


class OrderTooSmallError(InvalidInputError):
    """A derivative word is longer than the order of the lowered tuple."""


class InfeasibleError(InvalidInputError):
    """Synthesis was requested for data whose Pick matrix is not positive."""


class DepthExceededError(NumericalError):
    """A series did not reach its tolerance within the depth cap."""


class DecayNotEstablishedError(NumericalError):
    """Level norms of a displacement system did not show geometric decay."""


class SingularMapError(NumericalError):
    """The displacement map X -> X - sum F X F* is numerically singular."""


class GramMismatchError(NumericalError):
    """Two column maps meant to be isometrically related have different Gram matrices."""


class NotPSDError(NumericalError):
    """A matrix expected to be positive semidefinite has a negative eigenvalue."""


class CrossCheckError(NumericalError):
    """Two independent computations of the same quantity disagree."""
