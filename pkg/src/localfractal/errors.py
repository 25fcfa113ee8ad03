"""Exception hierarchy shared by the library and the command line front end."""


class LocalFractalError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(LocalFractalError, ValueError):
    """An argument lies outside the domain where an operation is defined."""


class ParameterError(LocalFractalError, ValueError):
    """Smoothness/integrability parameters violate a stated range."""


class ConfigurationError(LocalFractalError, ValueError):
    """Numerical settings are inconsistent (grid too coarse, h_min too small, ...)."""


class ContractionError(LocalFractalError, ValueError):
    """The contraction hypothesis max_i ||S_i||_inf < 1 does not hold."""

    def __init__(self, max_sup: float):
        self.max_sup = float(max_sup)
        super().__init__(
            f"contraction hypothesis violated: max_i ||S_i||_inf = {self.max_sup!r} >= 1"
        )


class ConfigParseError(LocalFractalError):
    """A configuration document could not be parsed (CLI exit status 2)."""
