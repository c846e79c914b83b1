"""Exception and warning types.

Data problems derive from :class:`DataError`, caller mistakes from
:class:`UsageError`; the CLI maps those two families to distinct exit codes.
"""


class TdsLbpError(Exception):
    """Base class for every error raised by this package."""


class DataError(TdsLbpError, ValueError):
    """Input data is malformed, inconsistent or degenerate."""


class UsageError(TdsLbpError, ValueError):
    """Parameters violate a documented precondition."""


class ManifestParseError(DataError):
    pass


class SizeMismatch(DataError):
    pass


class NonFiniteSample(DataError):
    def __init__(self, cell_index: int, offset: int):
        super().__init__(f"non-finite sample in cell {cell_index} at offset {offset}")
        self.cell_index = cell_index
        self.offset = offset


class TooFewCells(DataError):
    pass


class InvalidConfig(UsageError):
    pass


class InputTooShort(DataError):
    pass


class DegenerateImage(DataError):
    pass


class ImageTooSmall(DataError):
    pass


class AllNonUniform(DataError):
    def __init__(self, message: str, cell_index: int | None = None):
        super().__init__(message)
        self.cell_index = cell_index


class TooFew(UsageError):
    pass


class NuTooSmall(UsageError):
    pass


class EmptyCorpus(UsageError):
    pass


class ImageWriteError(TdsLbpError, OSError):
    pass


class ConvergenceWarning(UserWarning):
    """The QP solver stopped at max_iters above the KKT tolerance."""


class ZeroClutterDeviation(RuntimeWarning):
    """Clutter histograms have zero spread, so TCR is reported as +inf."""
