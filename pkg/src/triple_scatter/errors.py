"""Exception types raised across the package."""


class TripleScatterError(Exception):
    """Base class for all package errors."""


class SingularMatrix(TripleScatterError, ArithmeticError):
    """A pivot fell below the floor during elimination.

    Parameters
    ----------
    message : str
    factor : str, optional
        Name of the factor that could not be inverted.
    """

    def __init__(self, message="matrix is numerically singular", factor=None):
        super().__init__(message if factor is None else f"{message} [{factor}]")
        self.factor = factor


class OnCutWithoutSide(TripleScatterError, ValueError):
    """A square root was requested on [0, inf) without choosing a side."""


class NotHermitian(TripleScatterError, ValueError):
    """A Hermitian matrix was expected."""


class AtPole(TripleScatterError, ArithmeticError):
    """The evaluation point sits on (or next to) a pole of M."""


class NonConvergent(TripleScatterError, ArithmeticError):
    """Boundary-value extrapolation did not settle within tolerance."""


class WrongHalfPlane(TripleScatterError, ValueError):
    """The evaluation point lies in the wrong half-plane for the formula."""


class EdgeMass(TripleScatterError, ValueError):
    """A grid function carries too much mass near the grid edges."""


class NegativeNorm(TripleScatterError, ArithmeticError):
    """The weighted model norm came out negative beyond round-off."""


class NotInK(TripleScatterError, ValueError):
    """A model vector fails the K-membership test."""


class MaskedEverywhere(TripleScatterError, ArithmeticError):
    """The inverse-norm mask removed the entire support of a vector."""


class ConfigError(TripleScatterError, ValueError):
    """Invalid run configuration."""
