"""Exception types raised across the package."""


class MQRError(Exception):
    """Base class for all package errors."""


class InvalidIntervalError(MQRError, ValueError):
    pass


class InvalidArmError(MQRError, IndexError):
    pass


class RewardOutOfRangeError(MQRError, ValueError):
    pass


class CountMismatchError(MQRError, ValueError):
    pass


class NonPositiveAlphaError(MQRError, ValueError):
    pass


class HorizonTooLargeError(MQRError, ValueError):
    pass


class UnreachableStateError(MQRError, ValueError):
    pass


class StageOutOfRangeError(MQRError, IndexError):
    pass


class EmptyDatasetError(MQRError, ValueError):
    pass


class DegenerateLikelihoodError(MQRError, RuntimeError):
    """The log-likelihood is flat across the whole search bracket."""


class MalformedTrajectoryError(MQRError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class TooFewPointsError(MQRError, ValueError):
    pass


class NoConvergenceError(MQRError, RuntimeError):
    pass


class UnknownPolicyError(MQRError, ValueError):
    pass
