"""Exception hierarchy. CLI exit codes are keyed off these classes."""


class NarxError(Exception):
    """Base class for all package errors."""


class DataError(NarxError, ValueError):
    """Bad input data: missing columns, unparseable cells, out-of-range MOS."""


class ShapeError(NarxError, ValueError):
    """Array or vector dimensions do not conform."""


class NumericalError(NarxError, ArithmeticError):
    """Non-finite objective, failed factorization or undefined statistic."""


class DecompositionError(NumericalError):
    """Matrix is not symmetric positive definite to working precision."""


class UndefinedCorrelationError(NumericalError):
    """Pearson correlation requested for a constant vector."""


class ModelFileError(NarxError):
    """Base class for model-file problems."""


class FormatVersionError(ModelFileError):
    pass


class MalformedModelError(ModelFileError):
    pass


class ShapeInconsistencyError(ModelFileError):
    pass
