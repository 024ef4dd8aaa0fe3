"""Exception hierarchy shared by all modules."""


class ObstacleWaveError(Exception):
    """Base class for every error raised by this package."""


class EllipticityError(ObstacleWaveError):
    """Metric matrix is not positive definite at some point."""

    def __init__(self, x, message=None):
        self.x = x
        super().__init__(message or f"metric is not positive definite at x={x}")


class StencilError(ObstacleWaveError):
    """A field lacks values required by a finite-difference stencil."""


class GeometryError(ObstacleWaveError):
    pass


class ResolutionError(ObstacleWaveError):
    pass


class DomainError(ObstacleWaveError):
    """Invalid boundary selector or out-of-range index."""


class ShapeError(ObstacleWaveError):
    pass


class SamplingError(ObstacleWaveError):
    pass


class DegeneracyError(ObstacleWaveError):
    pass


class InfeasibleError(ObstacleWaveError):
    """Carleman parameters cannot be chosen (e.g. T <= T*)."""


class CFLError(ObstacleWaveError):
    pass


class TruncationError(ObstacleWaveError):
    def __init__(self, required, given):
        self.required = required
        self.given = given
        super().__init__(
            f"truncation radius {given:.6g} cannot be certified; "
            f"finite propagation requires R_trunc >= {required:.6g}"
        )


class PreconditionError(ObstacleWaveError):
    pass


class ClassViolationError(ObstacleWaveError):
    """Source does not belong to the admissible class."""


class ParameterError(ObstacleWaveError):
    pass


class RegressionError(ObstacleWaveError):
    pass


class LineSearchError(ObstacleWaveError):
    pass


class ConfigError(ObstacleWaveError):
    pass
