"""Exception and warning types raised across the package."""


class TipwatchError(Exception):
    """Base class for all errors raised by tipwatch."""


# input / series handling
class MissingColumn(TipwatchError, KeyError):
    pass


class NonUniformSampling(TipwatchError, ValueError):
    pass


class NonNumericEntry(TipwatchError, ValueError):
    pass


class TooShort(TipwatchError, ValueError):
    pass


class WindowTooLong(TipwatchError, ValueError):
    pass


class LagTooLarge(TipwatchError, ValueError):
    pass


# model fitting
class InadmissibleModel(TipwatchError, ValueError):
    pass


class DegenerateInput(TipwatchError, ValueError):
    pass


class ZeroVariance(TipwatchError, ValueError):
    pass


class AllCandidatesFailed(TipwatchError, RuntimeError):
    pass


# simulation
class NonFiniteState(TipwatchError, FloatingPointError):
    def __init__(self, time, message=None):
        self.time = time
        super().__init__(message or f"non-finite state at t={time:g}")


class InvalidRamp(TipwatchError, ValueError):
    pass


class ConfigError(TipwatchError, ValueError):
    pass


class NonConvergence(UserWarning):
    """Optimizer stopped on its iteration budget; the best point found is kept."""


class NoConvergence(UserWarning):
    """Equilibrium search produced no converged root."""


class NoEquilibrium(TipwatchError, RuntimeError):
    """No equilibrium of the requested kind exists (or none converged)."""
