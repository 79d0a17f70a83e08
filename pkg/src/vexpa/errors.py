class VexpaError(Exception):
    """Base class for analysis failures."""


class InsufficientSamplesError(VexpaError, ValueError):
    pass


class SingularPencilError(VexpaError):
    def __init__(self, message: str, condition: float):
        super().__init__(f"{message} (condition estimate {condition:.3e})")
        self.condition = condition


class RankDeficiencyError(VexpaError):
    def __init__(self, message: str, rank: int):
        super().__init__(message)
        self.rank = rank


class NotCoprimeError(VexpaError, ValueError):
    pass


class CollisionError(VexpaError):
    """Two nodes coincide where distinct nodes are required."""


class NonIdentifiableError(VexpaError):
    pass


class VandermondeConditioningWarning(UserWarning):
    pass


class DegenerateSequenceError(VexpaError):
    """A shift sequence carries no usable signal."""
