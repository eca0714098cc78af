"""Exception types shared across the package."""


class ChanSbgmError(Exception):
    """Base class for all package-specific errors."""


class InvalidArgumentError(ChanSbgmError, ValueError):
    """An argument violates a precondition (bad value, dimension mismatch)."""


class DomainMismatchError(ChanSbgmError, ValueError):
    """Objects from incompatible physical domains were combined."""


class CapacityError(ChanSbgmError, ValueError):
    """A requested size exceeds a configured capacity limit."""


class DegenerateInputError(ChanSbgmError, ValueError):
    """Input is degenerate (all-zero dataset, zero-norm vector, ...)."""


class NumericError(ChanSbgmError, RuntimeError):
    """A numerical routine failed on input that should have been valid."""
