"""Exception hierarchy.

Two families matter to callers: :class:`ValidationError` for bad input
(shapes, files, configuration) and :class:`NumericalError` for
computations that cannot be completed reliably.  The command line maps
them to exit codes 1 and 2 respectively.
"""

from __future__ import annotations


class TprodMorError(Exception):
    """Base class for every error raised by this package."""

    block: int | None = None


class ValidationError(TprodMorError, ValueError):
    """Input violates a documented precondition."""


class NumericalError(TprodMorError, ArithmeticError):
    """A numerical routine failed or produced an untrustworthy result."""


# -- validation -----------------------------------------------------------


class DimensionMismatch(ValidationError):
    pass


class NonFiniteValue(ValidationError):
    pass


class InsufficientSnapshots(ValidationError):
    pass


class BadMagic(ValidationError):
    pass


class TruncatedPayload(ValidationError):
    pass


class DimOverflow(ValidationError):
    pass


class InconsistentDimensions(ValidationError):
    pass


class UnsupportedFormat(ValidationError):
    pass


class ConfigError(ValidationError):
    pass


# -- numerical ------------------------------------------------------------


class SingularBlock(NumericalError):
    def __init__(self, block: int, rcond: float):
        super().__init__(
            f"Fourier block {block} is numerically singular (rcond={rcond:.3e})")
        self.block = block
        self.rcond = rcond


class PoleProximity(NumericalError):
    def __init__(self, block: int, rcond: float):
        super().__init__(
            f"z is too close to a pole of Fourier block {block} (rcond={rcond:.3e})")
        self.block = block
        self.rcond = rcond


class NonRealResult(NumericalError):
    def __init__(self, residual: float, scale: float):
        super().__init__(
            f"inverse transform left an imaginary residual {residual:.3e} "
            f"(max block magnitude {scale:.3e}); Hermitian pairing was broken upstream")
        self.residual = residual
        self.scale = scale


class ConvergenceFailure(NumericalError):
    def __init__(self, block: int | None, detail: str = ""):
        where = f" in Fourier block {block}" if block is not None else ""
        super().__init__(f"factorization did not converge{where}. {detail}".strip())
        self.block = block


class NearZeroSingularValue(NumericalError):
    def __init__(self, index: int, value: float, floor: float):
        super().__init__(
            f"kept singular value #{index} = {value:.3e} is below the floor {floor:.3e}")
        self.index = index
        self.value = value
        self.floor = floor


class UnstableSystem(NumericalError):
    def __init__(self, radius: float):
        super().__init__(f"system is not stable (spectral radius {radius:.6g})")
        self.radius = radius


class SolverStagnation(NumericalError):
    def __init__(self, block: int | None, residual: float):
        super().__init__(
            f"Stein solver stagnated at relative residual {residual:.3e}")
        self.block = block
        self.residual = residual


class IndefiniteGramian(NumericalError):
    def __init__(self, value: float, scale: float):
        super().__init__(
            f"Gramian has eigenvalue {value:.3e}, more negative than roundoff "
            f"allows for scale {scale:.3e}")
        self.value = value
        self.scale = scale
