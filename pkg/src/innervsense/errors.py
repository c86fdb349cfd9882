"""Exception types raised across the toolkit.

Everything derives from InnervsenseError so callers (and the CLI) can catch
one base class; each contract violation gets its own type so tests can pin
the exact failure mode.
"""


class InnervsenseError(Exception):
    """Base class for all toolkit errors."""


# core
class RangeError(InnervsenseError):
    """Value outside the representable ADC range."""


class GridOutOfRange(InnervsenseError):
    """Requested grid extends beyond a series' time span."""


class UnitMismatch(InnervsenseError):
    """Arithmetic attempted between series with different units."""


# pad-sim
class NonFiniteInput(InnervsenseError):
    """NaN or Inf fed to the pad model."""


class UnknownScenario(InnervsenseError):
    pass


class BadParams(InnervsenseError):
    """Scenario or pad parameters violate their invariants."""


# telemetry
class InvalidFrame(InnervsenseError):
    """Frame fields inconsistent with its message type."""


class CrcMismatch(InnervsenseError):
    pass


class SinkClosed(InnervsenseError):
    """Byte sink went away mid-emission."""


# dsp
class NonUniformSampling(InnervsenseError):
    pass


class CutoffOutOfRange(InnervsenseError):
    pass


class WindowOutOfRange(InnervsenseError):
    pass


class TooFewSamples(InnervsenseError):
    pass


class EmptySeries(InnervsenseError):
    pass


# fitting
class DegenerateX(InnervsenseError):
    """Regressor has zero variance."""


class LengthMismatch(InnervsenseError):
    pass


class FlatSignal(InnervsenseError):
    """Signal variance too small to identify a decay constant."""


class NoDecay(InnervsenseError):
    """Best-fit exponential amplitude is indistinguishable from zero."""


# cycles
class BoundaryOutOfRange(InnervsenseError):
    pass


class TooShortCycle(InnervsenseError):
    pass


class EmptyCycleSet(InnervsenseError):
    pass


class SeriesTooShort(InnervsenseError):
    pass


# stats
class UnbalancedDesign(InnervsenseError):
    pass


class InsufficientReplicates(InnervsenseError):
    pass


class DomainError(InnervsenseError):
    pass


class UnknownFactor(InnervsenseError):
    pass


# session-store
class IoError(InnervsenseError):
    pass


class AlreadyExists(InnervsenseError):
    pass


class CorruptSession(InnervsenseError):
    pass


class VersionMismatch(InnervsenseError):
    pass
