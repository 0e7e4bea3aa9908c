"""Exception types raised across the package."""


class PassyncError(Exception):
    """Base class for all package errors."""


class UnknownPreset(PassyncError, ValueError):
    pass


class ArbitraryRequiresEight(PassyncError, ValueError):
    pass


class IsolatedFollower(PassyncError, ValueError):
    """A follower has zero total incoming weight, so it cannot be normalized."""


class NonFiniteInput(PassyncError, ValueError):
    pass


class GridEmpty(PassyncError, ValueError):
    pass


class ConfigInvalid(PassyncError, ValueError):
    pass


class WrongControllerKind(PassyncError, ValueError):
    pass


class NumericalBlowup(PassyncError, ArithmeticError):
    """A state component exceeded the blowup threshold during integration."""

    def __init__(self, time, threshold=1e9):
        self.time = float(time)
        self.threshold = float(threshold)
        super().__init__(f"state magnitude exceeded {threshold:g} at t={self.time:.6g} s")
