"""Exception types raised across the package."""


class KLShellError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(KLShellError, ValueError):
    pass


class UnsupportedError(KLShellError, NotImplementedError):
    pass


class InvalidSetupError(KLShellError, ValueError):
    """Problem definition is inconsistent (missing spaces, bad loads, ...)."""


class SingularGeometryError(KLShellError, ArithmeticError):
    """Degenerate tangent plane at an evaluation point."""

    def __init__(self, message: str, xi=None):
        super().__init__(message if xi is None else f"{message} at xi={tuple(xi)}")
        self.xi = xi


class SingularSystemError(KLShellError, ArithmeticError):
    """Factorization of the saddle-point system broke down."""
