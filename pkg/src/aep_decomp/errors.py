"""Exception hierarchy shared by every module."""


class AepError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(AepError, ValueError):
    pass


class SingularGeometryError(AepError):
    pass


class NumericalFailureError(AepError):
    pass


class DegenerateNormalizationError(AepError):
    """Isolated current too small at some mesh to normalize by."""

    def __init__(self, mesh_index, ratio):
        self.mesh_index = mesh_index
        self.ratio = ratio
        super().__init__(
            f"isolated current at mesh {mesh_index} is {ratio:.3e} of the peak; "
            "cannot normalize"
        )


class DegenerateRegionError(AepError):
    pass


class SizeGuardError(AepError):
    pass


class ConfigError(AepError):
    pass
