"""Exception hierarchy shared across the package."""


class PathvalError(Exception):
    """Base class for all package-specific errors."""


class NotSymmetricError(PathvalError, ValueError):
    """Matrix expected to be symmetric is not, beyond tolerance."""


class RepairExceededError(PathvalError, ArithmeticError):
    """Eigenvalue clipping removed more mass than the repair policy allows."""


class OutOfRangeError(PathvalError, ValueError):
    """Scalar argument outside its documented domain."""


class EmptyInputError(PathvalError, ValueError):
    """Operation received an empty collection where data is required."""


class SizeMismatchError(PathvalError, ValueError):
    """Incompatible dimensions or an invalid data split."""


class ParseError(PathvalError, ValueError):
    """Malformed input file; message carries row/column location."""


class RaggedRowsError(ParseError):
    """CSV data row with a different arity than the header."""


class NumericalBreakdownError(PathvalError, ArithmeticError):
    """A solver lost numerical reliability and refuses to return a result."""


class SingularCovarianceError(PathvalError, ArithmeticError):
    """Covariance is rank-deficient in a direction the computation needs."""


class InfeasibleAnchorError(PathvalError, ValueError):
    """Line-search anchor violates one of the sampled constraints."""


class EmptyPathError(PathvalError, ValueError):
    """Solution path holds no usable (optimal) candidate."""


class AllDegenerateError(PathvalError, ArithmeticError):
    """Every candidate has zero sample variance; normalized statistic undefined."""


class ConfigError(PathvalError, ValueError):
    """Invalid experiment configuration (bad value or unknown key)."""
