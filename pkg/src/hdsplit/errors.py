"""Exception types shared across the package.

The CLI maps these onto exit codes: structural/usage problems exit 2,
input-data problems exit 3, and numerical degeneracies exit 4.
"""


class FactorizationError(ValueError):
    """A matrix factorization failed (e.g. Cholesky on a non-SPD input)."""

    def __init__(self, message: str, pivot: int | None = None):
        super().__init__(message)
        self.pivot = pivot


class DegenerateVarianceError(ArithmeticError):
    """A variance-like quantity required to be positive was not.

    Raised for non-positive estimated traces of squared products, zero
    spectra, and zero third-order traces: anywhere a standardization or a
    degrees-of-freedom ratio would divide by zero.
    """


class EnumerationCapError(ValueError):
    """The full U-statistic sum would exceed the enumeration cap.

    Carries the offending count so callers can report it; subsampled
    estimators are the intended fallback.
    """

    def __init__(self, message: str, count: int):
        super().__init__(message)
        self.count = count


class DataFormatError(ValueError):
    """An input file could not be ingested (ragged rows, bad cells, ...)."""


class HypothesisValidationError(ValueError):
    """A supplied hypothesis matrix is not a symmetric idempotent projection.

    Carries the ValidationReport so callers can surface the defects.
    """

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report
