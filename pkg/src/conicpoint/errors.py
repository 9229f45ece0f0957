"""Exception hierarchy shared by all modules."""


class GeometryError(ValueError):
    """Base class for geometric failures."""


class DegenerateInputError(GeometryError):
    """Inputs do not define the requested construction (coincident points, rank-deficient conic, ...)."""


class NotSquarePixelsError(GeometryError):
    """Operation requires fx == fy and zero skew."""


class EstimationError(RuntimeError):
    """A robust or iterative estimator could not produce an answer."""


class HorizonNotIdentifiableError(EstimationError):
    """Homography has no isolated real eigenvalue, so its fixed line is ambiguous."""


class ConditioningWarning(UserWarning):
    """Result is valid but numerically ill-conditioned."""


class SchemaError(ValueError):
    """An input document is missing a field or has the wrong shape."""
