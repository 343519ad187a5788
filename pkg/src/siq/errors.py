"""Exception types shared across the package."""


class SiqError(Exception):
    """Base class for all library errors."""


class InvalidCoalitionError(SiqError):
    """A coalition mask sets bits outside the player range 0..d-1."""


class CapacityError(SiqError):
    """An operation would materialize more state than its size cap allows."""


class UnsupportedOrderError(SiqError):
    """Weights were requested for an order the index does not define."""


class InsufficientBudgetError(SiqError):
    """The evaluation budget cannot cover the estimator's minimum cost."""


class BudgetExceededError(SiqError):
    """A game evaluation was requested beyond the configured call limit."""


class EmptySamplingRangeError(SiqError):
    """A coalition draw was requested from a plan with no sampled sizes."""


class SolverError(SiqError):
    """The weighted least-squares system stayed singular after regularization."""


class SchemaError(SiqError):
    """An input file or score set does not match the expected schema."""


class ConfigError(SiqError):
    """An experiment configuration is internally inconsistent."""
