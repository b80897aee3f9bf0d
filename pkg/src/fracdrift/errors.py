"""Exception hierarchy shared by all fracdrift modules."""


class FracdriftError(Exception):
    """Base class for every error raised by the package."""


class InvalidArgument(FracdriftError, ValueError):
    pass


class ResolutionError(FracdriftError, ValueError):
    """The grid cannot represent the requested object."""


class DomainError(FracdriftError, ValueError):
    pass


class OracleFailure(FracdriftError, RuntimeError):
    pass


class AccuracyError(FracdriftError, RuntimeError):
    pass


class NoCertificate(FracdriftError, RuntimeError):
    """Raised when a barrier constant search exhausts its bracket."""


class InstabilityError(FracdriftError, RuntimeError):
    pass


class StepRejected(FracdriftError, ValueError):
    """A time step violated the CFL bound.

    ``admissible_dt`` carries the largest step that would have been accepted.
    """

    def __init__(self, message: str, admissible_dt: float):
        super().__init__(message)
        self.admissible_dt = admissible_dt
