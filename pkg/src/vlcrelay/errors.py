"""Exception types shared across the simulator."""


class GridMismatchError(ValueError):
    """Two signals with different sample intervals were combined."""


class CirFormatError(ValueError):
    """A channel impulse response file could not be parsed.

    The message names the offending line number.
    """


class LoopDivergenceError(RuntimeError):
    """The relay loop-interference gain is too large for the feedback
    series to converge."""


class DeadSubcarrierError(RuntimeError):
    """A data subcarrier has (numerically) zero channel gain and cannot
    be equalized."""
