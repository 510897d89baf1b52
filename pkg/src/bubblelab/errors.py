"""Exception hierarchy shared by all modules.

Every error carries a short machine-readable ``code`` which the CLI prints
verbatim and maps onto its exit status.
"""


class BubbleLabError(Exception):
    code = "error"
    exit_status = 1


class InvalidInputError(BubbleLabError, ValueError):
    """A precondition on user-supplied parameters is violated."""

    code = "invalid-input"
    exit_status = 2


class PreconditionError(InvalidInputError):
    code = "precondition"


class UndefinedBoundError(InvalidInputError):
    code = "undefined-bound"


class NumericalFailure(BubbleLabError, RuntimeError):
    """An integrator, root finder or eigensolver did not deliver."""

    code = "numerical-failure"
    exit_status = 1
