"""Exception hierarchy shared by every module.

The CLI maps these onto its exit codes, so keep the split between usage
problems (bad arguments/config) and numerical faults.
"""


class MemchuaError(Exception):
    """Base class for all package errors."""


class DomainError(MemchuaError, ValueError):
    """An argument lies outside the mathematical domain of a formula."""


class ContractViolation(MemchuaError, ValueError):
    """A documented precondition on a state object does not hold."""


class UsageError(MemchuaError, ValueError):
    """Wrong kind of argument, unknown name, or malformed configuration."""


class InsufficientDataError(UsageError):
    """Too few samples/bits for the requested statistic."""


class IntegrationFault(MemchuaError, ArithmeticError):
    """Time integration produced a non-finite or runaway state."""

    def __init__(self, message: str, t: float):
        super().__init__(f"{message} at t={t:.9g} s")
        self.t = t


class IllPosedNetworkError(MemchuaError, ArithmeticError):
    """The MNA system matrix is singular (floating node, source loop, ...)."""


class SingularityError(MemchuaError, ArithmeticError):
    """A closed-form expression hit a zero denominator."""
