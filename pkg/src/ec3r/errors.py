"""Exception hierarchy shared across the package."""


class Ec3Error(Exception):
    """Base class for every error raised by ec3r."""


class InstanceError(Ec3Error, ValueError):
    """Structurally malformed clause, assignment or instance."""


class ParseError(InstanceError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class OracleGuardError(Ec3Error):
    """Brute-force enumeration refused because n is over the guard."""


class InfeasibleError(Ec3Error):
    """A generator request that cannot be satisfied."""


class DimensionError(Ec3Error, ValueError):
    pass


class CouplingGuardError(Ec3Error, ValueError):
    """omega/c outside the weak-coupling regime without an explicit override."""


class NumericalError(Ec3Error, ArithmeticError):
    """Numerical failure that must never be silently truncated."""


class KrylovConvergenceError(NumericalError):
    pass


class DegenerateCollapseError(NumericalError):
    pass


class DegeneracyError(NumericalError):
    pass
