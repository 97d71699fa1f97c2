"""Exception types raised across the package."""


class ThermolensError(Exception):
    """Base class for all package errors."""


class NotHermitianError(ThermolensError, ValueError):
    def __init__(self, deviation, tol):
        self.deviation = float(deviation)
        self.tol = float(tol)
        super().__init__(
            f"operator is not Hermitian: max |A - A^H| = {self.deviation:.3e} "
            f"exceeds tolerance {self.tol:.1e}"
        )


class NotPSDError(ThermolensError, ValueError):
    """Raised when a matrix that should be positive semidefinite is not.

    The most negative eigenvalue is kept on ``eigenvalue``.
    """

    def __init__(self, eigenvalue, tol, context=""):
        self.eigenvalue = float(eigenvalue)
        self.tol = float(tol)
        msg = f"matrix is not positive semidefinite: eigenvalue {self.eigenvalue:.3e} < -{self.tol:.1e}"
        if context:
            msg = f"{msg} ({context})"
        super().__init__(msg)


class DimensionError(ThermolensError, ValueError):
    pass


class CapacityError(ThermolensError, ValueError):
    """Requested size exceeds what a dense/exhaustive route supports."""


class QuadratureError(ThermolensError, ArithmeticError):
    def __init__(self, estimate, error_bound, panels):
        self.estimate = estimate
        self.error_bound = float(error_bound)
        self.panels = int(panels)
        super().__init__(
            f"adaptive quadrature did not converge within {self.panels} panels "
            f"(error bound {self.error_bound:.3e})"
        )
