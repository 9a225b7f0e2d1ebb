class AlphaVBError(ValueError):
    """Base class for every error raised by the alphavb library."""

    default_message = "alphavb error"

    def __init__(self, message=None):
        super().__init__(message or self.default_message)


class ShapeError(AlphaVBError):
    default_message = "shape"


class NonFiniteInputError(AlphaVBError):
    default_message = "non-finite input"


class DomainError(AlphaVBError):
    default_message = "domain"


class NumericOverflowError(AlphaVBError):
    default_message = "numeric overflow"


class InfeasibleObjectiveError(AlphaVBError):
    default_message = "infeasible objective"


class AlphaRangeError(AlphaVBError):
    default_message = "cavi requires alpha > 1"


class DegenerateBatchError(AlphaVBError):
    default_message = "degenerate batch"


class InvalidSparsityError(AlphaVBError):
    default_message = "invalid sparsity"


class UnknownConfigError(AlphaVBError):
    default_message = "unknown config"
