"""Exception hierarchy shared by the analytic solver, simulator and CLI."""


class SpaceBatchError(Exception):
    pass


# --- configuration -----------------------------------------------------------

class ConfigError(SpaceBatchError, ValueError):
    pass


class SMaxExceedsAntennas(ConfigError):
    pass


class BufferTooSmall(ConfigError):
    pass


class RatesNotAscending(ConfigError):
    pass


class ThresholdMismatch(ConfigError):
    pass


class BadTrafficWeights(ConfigError):
    pass


class InvalidParameter(ConfigError):
    pass


# --- combinatorics -----------------------------------------------------------

class InvalidComposition(SpaceBatchError, ValueError):
    pass


class OverflowImpossible(SpaceBatchError, ValueError):
    """Occupancy beyond the bound up to which exact arithmetic is allowed."""


class TooLarge(SpaceBatchError, ValueError):
    pass


# --- channel -----------------------------------------------------------------

class BadBatchSize(SpaceBatchError, ValueError):
    pass


class SubsetExplosion(SpaceBatchError, ValueError):
    pass


# --- chain -------------------------------------------------------------------

class BadState(SpaceBatchError, IndexError):
    pass


class NotConverged(SpaceBatchError, RuntimeError):
    pass


class LambdaZero(SpaceBatchError, ValueError):
    pass


class NegativeMass(SpaceBatchError, ArithmeticError):
    pass


class MetricsUndefined(SpaceBatchError, ZeroDivisionError):
    """Raised when the accepted arrival rate is zero."""


class HeterogeneousTrafficUnsupported(SpaceBatchError, ValueError):
    pass


# --- simulator ---------------------------------------------------------------

class EmptyQueue(SpaceBatchError, ValueError):
    pass


class InvalidDuration(SpaceBatchError, ValueError):
    pass


class NoDeliveries(SpaceBatchError, ValueError):
    pass


# --- experiments -------------------------------------------------------------

class SpecError(SpaceBatchError, ValueError):
    pass
