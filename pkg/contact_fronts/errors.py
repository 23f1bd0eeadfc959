"""Exception hierarchy for contact-fronts."""


class SimulationError(Exception):
    """Base class for every error raised by the simulator."""


class InvalidParameterError(SimulationError, ValueError):
    """A rate, probability, horizon or similar parameter is out of range."""


class OutOfHorizonError(SimulationError, ValueError):
    """A time query falls outside the event log horizon."""


class ResourceCapError(SimulationError):
    """A hard resource cap was exceeded."""


class WindowOverflowError(ResourceCapError):
    """A lattice window grew beyond the configured cap."""


class InconsistentSpecError(SimulationError, ValueError):
    """An explicit configuration contradicts its claimed rightmost site."""


class PreconditionError(SimulationError, ValueError):
    """An operation was called with inputs violating its precondition."""


class NoOccupiedSiteError(SimulationError):
    """The process has no occupied site at the requested time."""


class InvalidModeError(SimulationError, ValueError):
    """A property policy mode does not apply to the process kind."""


class ExtinctRunError(SimulationError):
    """The base process died before its first certified renewal."""


class TooFewSurvivorsError(SimulationError):
    """Fewer surviving trials than an estimator needs."""


class InsufficientSamplesError(SimulationError):
    """Fewer increment samples than a statistic needs."""


class CounterexampleNotFoundError(SimulationError):
    """A randomized counterexample search exhausted its budget."""


class ConfigError(SimulationError):
    """The run configuration is missing, malformed or invalid."""
