"""Exception hierarchy shared by all modules."""


class BoltzflowError(Exception):
    """Base class for errors raised by this package."""


class InvalidArgumentError(BoltzflowError, ValueError):
    pass


class SingularityError(BoltzflowError, ArithmeticError):
    """Evaluation hit the collision set of a singular potential."""


class OverflowDomainError(BoltzflowError, OverflowError):
    pass


class NumericalError(BoltzflowError, ArithmeticError):
    """A non-finite value appeared; ``where`` names the offending stage."""

    def __init__(self, message, where=None, step=None):
        super().__init__(message)
        self.where = where
        self.step = step


class ConvergenceError(BoltzflowError, RuntimeError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class OutOfDomainError(BoltzflowError, ValueError):
    def __init__(self, message, point=None, time=None):
        super().__init__(message)
        self.point = point
        self.time = time


class DensityFloorError(BoltzflowError, ValueError):
    """Interpolated density fell below the admissible floor."""


class TrainingDivergedError(NumericalError):
    def __init__(self, message, epoch=None):
        super().__init__(message, where="train")
        self.epoch = epoch
