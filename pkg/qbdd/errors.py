"""Exception types shared by the solver modules and the command line."""


class QbddError(Exception):
    """Base error. ``code`` is machine readable, ``exit_code`` is used by the CLI."""

    exit_code = 1
    default_code = "error"

    def __init__(self, message, code=None, **details):
        super().__init__(message)
        self.message = message
        self.code = code or self.default_code
        self.details = details

    def to_json(self):
        record = {"error": self.code, "message": self.message}
        if self.details:
            record["details"] = self.details
        return record


class PreconditionError(QbddError):
    """An operation was called outside the range where its guarantee holds."""

    exit_code = 2
    default_code = "precondition"


class RankDeficientError(PreconditionError):
    default_code = "rank deficient"

    def __init__(self, message="rank deficient", **details):
        super().__init__(message, **details)


class RadiusExceededError(PreconditionError):
    default_code = "radius exceeded"

    def __init__(self, message="radius exceeded", **details):
        super().__init__(message, **details)


class BudgetExceededError(QbddError):
    """Enumeration, group or state-vector budget exhausted."""

    exit_code = 3
    default_code = "budget exceeded"


class VerificationError(QbddError):
    """A candidate answer failed its acceptance gate or a logged bound failed."""

    exit_code = 4
    default_code = "verification failed"
