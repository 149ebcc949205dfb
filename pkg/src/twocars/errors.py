"""Exception hierarchy shared by every module."""


class BarrierError(Exception):
    """Base class for all errors raised by :mod:`twocars`."""


class DomainError(BarrierError, ValueError):
    """An argument lies outside the range where a quantity is defined."""


class NoSignChange(DomainError):
    pass


class MaxIterations(BarrierError, RuntimeError):
    pass


class OutOfDomain(DomainError):
    """Surface parameters fall outside the valid part of a barrier piece."""


class RegimeMismatch(DomainError):
    pass


class Unsupported(BarrierError):
    pass


class OutOfChart(DomainError):
    """The state is not covered by the state-space chart of a piece."""


class InsideCapture(DomainError):
    pass


class NotOnBarrier(BarrierError):
    pass


class PolicyRange(DomainError):
    pass


class BudgetExceeded(BarrierError):
    pass


class BuildError(BarrierError, RuntimeError):
    """Branches of a piecewise maximal-time function disagree at a junction."""
