"""Exception hierarchy shared by the package."""


class SparseQuasiError(Exception):
    """Base class for all errors raised by :mod:`sparse_quasi`."""


class EmptyIndexSetError(SparseQuasiError, ValueError):
    """No multi-index with positive components has the requested sum."""


class DimensionError(SparseQuasiError, ValueError):
    """Array or table shape does not match the grid it is attached to."""


class DataError(SparseQuasiError, ValueError):
    """A sampled or computed node value is not finite."""


class RegistryError(SparseQuasiError, KeyError):
    """Unknown test function name."""


class OracleFailure(SparseQuasiError, RuntimeError):
    """A reference integral did not converge within its node budget."""
