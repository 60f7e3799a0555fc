"""Exception hierarchy shared by all modules."""


class NCFreeError(Exception):
    """Base class for all errors raised by ncfree."""


class DimensionError(NCFreeError, ValueError):
    pass


class SingularMatrixError(NCFreeError, ArithmeticError):
    """A matrix was numerically singular.

    ``pivot`` is the magnitude of the offending pivot and ``where`` optionally
    names the expression node or solver stage that produced the matrix.
    """

    def __init__(self, pivot, where=None):
        self.pivot = float(pivot)
        self.where = where
        msg = f"matrix is numerically singular (pivot {self.pivot:.3e})"
        if where is not None:
            msg += f" at {where}"
        super().__init__(msg)


class ConvergenceError(NCFreeError, RuntimeError):
    """A fixed-point iteration hit its iteration cap."""

    def __init__(self, message, residual=float("nan"), iterations=0, trace=None):
        self.residual = float(residual)
        self.iterations = int(iterations)
        self.trace = list(trace) if trace is not None else []
        super().__init__(f"{message} (residual {self.residual:.3e} after {self.iterations} iterations)")


class ParseError(NCFreeError, ValueError):
    def __init__(self, message, position):
        self.position = position
        super().__init__(f"{message} at position {position}")


class ContractError(NCFreeError, ValueError):
    """An operation was called outside its precondition."""


class CapacityError(NCFreeError, ValueError):
    """A combinatorial size cap was exceeded."""
