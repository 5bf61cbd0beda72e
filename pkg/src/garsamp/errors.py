"""Exception hierarchy shared by all modules."""


class GarsampError(Exception):
    """Base class for library errors."""


class ModelError(GarsampError):
    """Inconsistent model metadata (branch flags, shape classes, lengths)."""


class DomainError(GarsampError, ValueError):
    """Evaluation point lies outside the declared support."""


class NumericError(GarsampError, ArithmeticError):
    """A numerical routine failed (non-convergence, non-finite values)."""

    def __init__(self, message, bracket=None):
        super().__init__(message)
        self.bracket = bracket


class DegenerateIntervalError(GarsampError):
    """Every simple estimate of a region is unbounded."""


class ContractError(GarsampError, ValueError):
    """A caller-supplied object violates an operation's precondition."""


class ParameterError(GarsampError, ValueError):
    """An argument is outside its admissible range."""


class ImproperEnvelope(GarsampError):
    """exp(-W) has infinite mass on one tail."""

    def __init__(self, message, tail):
        super().__init__(message)
        self.tail = tail


class BoundViolation(GarsampError):
    """Fixed-bound rejection sampling met a likelihood ratio above one."""

    def __init__(self, message, x=None, ratio=None):
        super().__init__(message)
        self.x = x
        self.ratio = ratio


class EnvelopeViolation(GarsampError):
    """An adaptive envelope failed to dominate the target at a proposal."""

    def __init__(self, message, x=None, ratio=None):
        super().__init__(message)
        self.x = x
        self.ratio = ratio


class ExpressionSyntaxError(GarsampError, ValueError):
    """Malformed expression text; ``position`` is a 0-based offset."""

    def __init__(self, message, position):
        super().__init__(f"{message} at offset {position}")
        self.position = position


class ExpressionDomainError(GarsampError, ValueError):
    """An expression was evaluated outside the domain of one of its functions."""


class ConfigError(GarsampError, ValueError):
    """Invalid model configuration document."""
