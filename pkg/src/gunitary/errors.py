"""Exception types shared across the package."""


class GunitaryError(Exception):
    """Base class for all errors raised by this package."""


class ContractViolation(GunitaryError, ValueError):
    """An operation was called with arguments outside its documented domain."""


class SolverFailure(GunitaryError):
    """The SDP solver could not produce a verified answer."""


class NoUnitalRealization(GunitaryError):
    """The distinguished element is not a unitary in the given realization."""


class InconsistencyError(GunitaryError):
    """Two computations that must agree do not (e.g. a kernel was mis-detected)."""


class AmbiguousKernelWarning(UserWarning):
    """A seminorm value fell inside the guard band around the kernel tolerance."""
