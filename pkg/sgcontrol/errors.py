from typing import List, Optional, Sequence, Tuple


class SGControlError(Exception):
    """Base class of every error raised by sgcontrol."""


class InvalidModeError(SGControlError, ValueError):
    """The zero lattice vector was used as a mode index."""


class GeometryMismatchError(SGControlError, ValueError):
    """Fields or signals with different geometry, truncation or horizon were combined."""


class ContractViolation(SGControlError, ValueError):
    """An input violates a documented precondition."""


class AliasingError(SGControlError, ValueError):
    """The quadrature grid is too coarse for exact evaluation of trigonometric products."""


class RampTooWideError(SGControlError, ValueError):
    """A lift ramp does not fit inside the shortest segment of the shift."""


class ConfigError(SGControlError, ValueError):
    """An experiment configuration is invalid."""


class DivergenceError(SGControlError, RuntimeError):
    """The integrated state left the admissible region.

    Attributes:
        time (float): Time at which the blow-up was detected.
        norm (float): V¹ norm of the state at that time (may be ``nan``).
    """

    def __init__(self, time: float, norm: float):
        super().__init__('Integration diverged at t={:.6g} (V1 norm {:.6g})'.format(time, norm))
        self.time = time
        self.norm = norm


class RejectedPairError(SGControlError, ValueError):
    """A generator pair (m, n) violates the saturation hypotheses.

    Attributes:
        reason (str): Which hypothesis failed.
    """

    def __init__(self, message: str, reason: str):
        super().__init__(message)
        self.reason = reason


class DegenerateGeometryError(SGControlError, ArithmeticError):
    """The interaction of a valid pair vanishes numerically."""


class LadderFailure(SGControlError, RuntimeError):
    """No generator pair could certify a ladder target."""

    def __init__(self, message: str, tried: Optional[Sequence[Tuple[tuple, str]]] = None):
        super().__init__(message)
        self.tried = list(tried or [])


class StageFailure(SGControlError, RuntimeError):
    """A pipeline stage could not meet its error budget.

    Attributes:
        stage (int): Stage index (0 denotes the low-mode projection).
        achieved (float): Smallest end-state error reached.
        budget (float): The budget that was missed.
        attempts (list): ``(k, error)`` for every attempt.
        trace (list): Reports of the stages completed before the failure.
    """

    def __init__(self, stage: int, achieved: float, budget: float,
                 attempts: Optional[List[Tuple[int, float]]] = None, trace: Optional[list] = None):
        super().__init__('Stage {} missed its budget: error {:.6g} > {:.6g}'.format(stage, achieved, budget))
        self.stage = stage
        self.achieved = achieved
        self.budget = budget
        self.attempts = list(attempts or [])
        self.trace = list(trace or [])
