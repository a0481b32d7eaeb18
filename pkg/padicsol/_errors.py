"""Exception hierarchy shared by every padicsol module.

All errors derive from `PadicError` so callers can catch the whole family
at once. `InvalidInput` additionally subclasses `ValueError` because it is
raised for malformed user data (JSON files, CLI arguments).
"""


class PadicError(Exception):
    """Base class for all padicsol errors."""


class InvalidInput(PadicError, ValueError):
    """The input system or arguments are malformed."""


class InvalidTransform(PadicError):
    """A transform step has a zero multiplier or a zero equation scale."""


class ContextNotApplicable(PadicError):
    """The operation needs `tau` but the degree is not p^tau (p - 1)."""


class PreconditionViolated(PadicError):
    """A constructive routine was called outside its hypotheses."""


class NotApplicable(PadicError):
    """An engine or route does not cover the given system."""


class BudgetExceeded(PadicError):
    """A search ran out of its state budget.

    `lower_bound` carries the best proven bound for searches that compute
    a smallest value (gamma star), `None` elsewhere.
    """

    def __init__(self, msg: str, lower_bound: int | None = None) -> None:
        super().__init__(msg)
        self.lower_bound = lower_bound


class InternalError(PadicError):
    """A branch that the case analysis proves unreachable was reached."""


class RuleViolation(InternalError):
    """A contraction rule did not deliver its niveau or parity gain."""


class ScheduleError(PadicError):
    """A contraction schedule ran out of classes to merge."""


class NeedsCycling(PadicError):
    """The degree-4 system must go through the level-rotating transform."""
