"""
Padesum Errors
==============

Exception hierarchy shared by every module. Each error derives from
``PadesumError`` and from the builtin that best matches its nature, so
callers may catch either.
"""

from typing import Optional


class PadesumError(Exception):
    """Base class for all padesum failures."""


# -----------------------------------------------------------------------------
# Precision and polynomial arithmetic
# -----------------------------------------------------------------------------

class PrecisionError(PadesumError, ValueError):
    """Requested working precision is below the supported minimum."""


class NonConvergence(PadesumError, ArithmeticError):
    """Polynomial root iteration did not reach the residual tolerance."""


class PoleAtPoint(PadesumError, ZeroDivisionError):
    """Rational function evaluated at (or numerically on) a pole."""


class DivergentAtInfinity(PadesumError, ArithmeticError):
    """Numerator degree exceeds denominator degree."""


class MultiplePole(PadesumError, ArithmeticError):
    """Denominator roots are not numerically separated."""


# -----------------------------------------------------------------------------
# Continued-fraction solver
# -----------------------------------------------------------------------------

class DegenerateSeries(PadesumError, ArithmeticError):
    """A leading series coefficient needed as a divisor is zero."""


class ZeroInterpolant(PadesumError, ArithmeticError):
    """A prescribed or descended interpolation value is zero."""


class VerificationFailed(PadesumError, ArithmeticError):
    """The assembled rational function fails its interpolation checks."""


# -----------------------------------------------------------------------------
# Quadrature and Laplace evaluation
# -----------------------------------------------------------------------------

class NonConvergent(PadesumError, ArithmeticError):
    """Quadrature exhausted its term or refinement budget."""


class EvaluationError(PadesumError, RuntimeError):
    """Evaluation failed at one point of a batch."""

    def __init__(self, index: int, cause: str):
        self.index = index
        self.cause = cause
        super().__init__(f"evaluation failed at index {index}: {cause}")

    def __reduce__(self):
        return (type(self), (self.index, self.cause))


# -----------------------------------------------------------------------------
# Exponential sums and downstream use
# -----------------------------------------------------------------------------

class UnstableTail(PadesumError, ArithmeticError):
    """An exponent has non-positive real part, so the sum does not decay."""


class ImaginaryLeak(PadesumError, ArithmeticError):
    """Evaluated sum carries an imaginary part above tolerance."""


class DomainError(PadesumError, ValueError):
    """Argument lies outside the validated domain of an approximant."""


class AllFailed(PadesumError, RuntimeError):
    """Every configuration of a parameter sweep failed or was rejected."""


class PipelineError(PadesumError, RuntimeError):
    """A step of the approximation pipeline failed."""

    def __init__(self, step: str, cause: Optional[BaseException] = None):
        self.step = step
        self.cause = cause
        detail = f"{type(cause).__name__}: {cause}" if cause is not None else "failed"
        super().__init__(f"step '{step}' failed ({detail})")

    def __reduce__(self):
        return (type(self), (self.step, None))


class UnknownTarget(PadesumError, KeyError):
    """Requested target name is not registered."""

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "unknown target"


class CoefficientFileError(PadesumError, ValueError):
    """A coefficient file is missing, unreadable or malformed."""
