"""Exception hierarchy shared by all modules."""


class MfpdError(Exception):
    pass


class DomainError(MfpdError, ValueError):
    """A point lies on or outside the unit circle where an interior point is required."""


class SingularityError(MfpdError, ValueError):
    """Evaluation at the diagonal of a singular kernel."""


class ConfigurationError(MfpdError, ValueError):
    pass


class NumericalError(MfpdError, ArithmeticError):
    pass


class ResourceError(MfpdError, RuntimeError):
    pass


class AssemblyError(MfpdError, ValueError):
    def __init__(self, message, triangle=None):
        super().__init__(message)
        self.triangle = triangle


class FitError(MfpdError, ValueError):
    pass
