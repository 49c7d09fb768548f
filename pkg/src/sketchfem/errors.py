"""Exception types shared across the package.

The CLI maps these onto exit codes: validation-type errors exit with 2,
numerical failures with 3.
"""


class SketchFemError(Exception):
    """Base class for all package errors."""


class MeshFormatError(SketchFemError):
    """The mesh file cannot be parsed."""


class ValidationError(SketchFemError):
    """Inputs violate a precondition (degenerate mesh, inadmissible field, ...)."""


class FingerprintMismatchError(ValidationError):
    """An offline bundle does not belong to the supplied mesh."""


class ConfigError(ValidationError):
    """A run configuration file is malformed or inconsistent."""


class BundleFormatError(SketchFemError):
    """An offline bundle file is corrupt, truncated, or not a bundle."""


class NumericalError(SketchFemError):
    """A numerical routine failed to meet its accuracy contract."""


class RankDeficiencyError(NumericalError):
    """A tall matrix expected to have full column rank does not."""


class SketchSingularError(NumericalError):
    """The sketched Gram matrix is not positive definite.

    Signals that the sample hit fewer than rho independent rows; callers
    retry with a fresh random stream a bounded number of times.
    """

    def __init__(self, message, retries=0, elapsed_s=0.0):
        super().__init__(message)
        self.retries = retries
        self.elapsed_s = elapsed_s
