"""Exception types raised across the package."""


class BatteryError(Exception):
    """Base class for all errors raised by qutrit_battery."""


class InvalidInputError(BatteryError, ValueError):
    pass


class RangeError(InvalidInputError):
    """A time or parameter lies outside its admissible interval."""


class DegenerateEigensystemError(BatteryError):
    pass


class MissingSolutionError(BatteryError):
    """A numerical protocol was discretized before a solver result was attached."""


class SingularGapError(BatteryError):
    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class NotCriticalError(BatteryError):
    """Raised when a schedule does not satisfy its Euler-Lagrange equations."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class NoConvergenceError(BatteryError):
    def __init__(self, message, residual_norm=None):
        super().__init__(message)
        self.residual_norm = residual_norm


class StepSizeError(BatteryError):
    """Integration drifted beyond tolerance; use a smaller time step."""


class NoCrossingError(BatteryError):
    def __init__(self, message, pair=None):
        super().__init__(message)
        self.pair = pair


class NotChargedError(BatteryError):
    pass


class FitError(BatteryError):
    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class TomographyConstructionError(BatteryError):
    pass


class ConfigError(BatteryError, ValueError):
    pass
