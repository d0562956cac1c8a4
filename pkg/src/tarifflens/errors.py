"""Exception hierarchy.

Every error carries an ``exit_code`` so the command-line front end can map
failures without a lookup table of its own.
"""


class TariffLensError(Exception):
    exit_code = 1

    def __init__(self, message="", **details):
        super().__init__(message or self.__class__.__name__)
        self.details = details

    def to_dict(self):
        out = {"error": self.__class__.__name__, "message": str(self)}
        out.update(self.details)
        return out


class ValidationError(TariffLensError, ValueError):
    exit_code = 2


class WrongLength(ValidationError):
    pass


class NonPositiveDemand(ValidationError):
    def __init__(self, hour, value=None):
        super().__init__(f"non-positive demand {value!r} at hour {hour}", hour=hour)
        self.hour = hour


class NonFinite(ValidationError):
    pass


class EmptyCollection(ValidationError):
    pass


class MissingHeader(ValidationError):
    pass


class MalformedRow(ValidationError):
    def __init__(self, line, reason):
        super().__init__(f"line {line}: {reason}", line=line, reason=reason)
        self.line = line
        self.reason = reason


class DuplicateConflict(ValidationError):
    pass


class SchemaMismatch(ValidationError):
    pass


class IoFailure(ValidationError):
    pass


class NonFiniteRate(ValidationError):
    pass


class ConsumerSetMismatch(ValidationError):
    pass


class TooFewConsumers(ValidationError):
    pass


class KTooLarge(TariffLensError, ValueError):
    exit_code = 3


class UnknownDay(TariffLensError, KeyError):
    exit_code = 4

    def __str__(self):
        return self.args[0] if self.args else "UnknownDay"


class ConvergenceError(TariffLensError, RuntimeError):
    exit_code = 5


class NoConvergence(ConvergenceError):
    def __init__(self, iterations, residual, trace=None):
        super().__init__(
            f"no convergence after {iterations} iterations (residual {residual:.3e})",
            iterations=iterations,
            residual=residual,
        )
        self.iterations = iterations
        self.residual = residual
        self.trace = list(trace or [])


class InteriorityViolated(ConvergenceError):
    def __init__(self, hour, consumer=None):
        msg = f"non-positive demand at hour {hour}"
        if consumer is not None:
            msg += f" for consumer {consumer}"
        super().__init__(msg, hour=hour, consumer=consumer)
        self.hour = hour
        self.consumer = consumer
