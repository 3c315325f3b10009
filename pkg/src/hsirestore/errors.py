"""Exception hierarchy.

Each class carries the CLI exit code for its failure class so scripts can
branch on it.
"""


class HsiError(Exception):
    exit_code = 1


class ShapeError(HsiError, ValueError):
    """Dimensions of two inputs do not agree, or a dimension is empty."""

    exit_code = 1


class FormatError(HsiError):
    """Bad magic, version, dtype or reserved bytes in a binary file."""

    exit_code = 2


class LengthError(FormatError):
    """Payload shorter or longer than the header implies."""


class DataError(HsiError):
    """Non-finite values where finite ones are required."""

    exit_code = 2


class NumericalError(HsiError):
    exit_code = 3


class ConditioningError(NumericalError):
    def __init__(self, message, eigenvalue=None):
        super().__init__(message)
        self.eigenvalue = eigenvalue


class RankError(NumericalError):
    """Not enough pixels (or complete pixels) for a stable estimate."""


class DegenerateBandError(NumericalError):
    def __init__(self, band):
        super().__init__(f"band {band} is constant (max == min); cannot normalize")
        self.band = band


class DomainError(NumericalError):
    """Input outside a transform's domain (e.g. negative counts)."""


class UnderdeterminedError(NumericalError):
    """A masked pixel has fewer usable observations than the subspace dimension."""

    exit_code = 4

    def __init__(self, message, pixel=None):
        super().__init__(message)
        self.pixel = pixel
