class SatguardError(Exception):
    pass


class DimensionError(SatguardError, ValueError):
    pass


class InputError(SatguardError, ValueError):
    pass


class FeasibilityError(SatguardError):
    """The problem data rule out any admissible tuning (e.g. non-Hurwitz A, c0 >= rho)."""


class InfeasibleGainError(SatguardError):
    """A gain violates the hypothesis of the bound being evaluated."""


class DomainError(SatguardError, ValueError):
    pass


class OrderingError(SatguardError, ValueError):
    pass


class ExtrapolationError(SatguardError, ValueError):
    pass


class UnsupportedSignalError(SatguardError):
    pass


class IntegrationFault(SatguardError):
    def __init__(self, message, t_last_good):
        super().__init__(f"{message} (last good t={t_last_good:.9g})")
        self.t_last_good = t_last_good


class ConfigError(SatguardError):
    def __init__(self, path, message):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class HorizonWarning(UserWarning):
    pass


class AuthorityMarginError(FeasibilityError, ValueError):
    """The actuator range does not strictly contain the range of g."""
