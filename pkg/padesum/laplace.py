"""
Laplace Transform Evaluation
============================

Evaluates ``F(z) = int_0^inf f(x) exp(-z x) dx`` for ``Re z >= 0`` either
from a closed form or by double-exponential quadrature on the substitution
``x = exp(u - exp(-u))``, which clusters nodes at both ends of the half-line.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial
from typing import Callable, List, Optional, Sequence, Tuple, Union

import mpmath
from mpmath import mp, mpc, mpf

from .errors import EvaluationError, NonConvergent
from .polyrat import Number, PrecisionContext, current_context, to_mpc

logger = logging.getLogger(__name__)

RealFunction = Callable[[mpf], mpf]
ComplexFunction = Callable[[mpc], mpc]

DEFAULT_H0 = 0.5
DEFAULT_MAX_HALVINGS = 12
DEFAULT_MAX_TERMS = 200000
DEFAULT_STOP_RUN = 3


@dataclass(frozen=True)
class QuadratureParams:
    """
    Settings for a single quadrature pass.

    A direction stops once ``stop_run`` consecutive terms satisfy
    ``|term| <= 10**floor_exponent * |partial sum|``.
    """

    h: Union[float, str] = DEFAULT_H0
    floor_exponent: int = -110
    max_terms: int = DEFAULT_MAX_TERMS
    stop_run: int = DEFAULT_STOP_RUN

    def __post_init__(self):
        if mpf(self.h) <= 0:
            raise ValueError("h must be positive")
        if self.max_terms < 1 or self.stop_run < 1:
            raise ValueError("max_terms and stop_run must be positive")

    @classmethod
    def for_digits(cls, digits: int, h: Union[float, str] = DEFAULT_H0, **kwargs) -> "QuadratureParams":
        return cls(h=h, floor_exponent=-(digits + 10), **kwargs)


@dataclass(frozen=True)
class ClosedForm:
    formula: ComplexFunction


@dataclass(frozen=True)
class Numeric:
    integrand: RealFunction
    max_halvings: int = DEFAULT_MAX_HALVINGS
    max_terms: int = DEFAULT_MAX_TERMS
    breakpoints: Tuple[float, ...] = ()


@dataclass(frozen=True)
class LaplaceEvaluator:
    """Either a closed-form transform or a numeric one over a real integrand."""

    kind: Union[ClosedForm, Numeric]

    @classmethod
    def closed_form(cls, formula: ComplexFunction) -> "LaplaceEvaluator":
        return cls(ClosedForm(formula))

    @classmethod
    def numeric(cls, integrand: RealFunction, **kwargs) -> "LaplaceEvaluator":
        return cls(Numeric(integrand, **kwargs))

    @property
    def is_numeric(self) -> bool:
        return isinstance(self.kind, Numeric)

    def __call__(self, z: Number) -> mpc:
        z = to_mpc(z)
        if z.real < 0:
            raise ValueError("Laplace transforms are evaluated for Re z >= 0 only")
        if isinstance(self.kind, ClosedForm):
            return mpc(self.kind.formula(z))
        options = {"max_halvings": self.kind.max_halvings, "max_terms": self.kind.max_terms}
        if self.kind.breakpoints:
            return piecewise_quadrature(
                self.kind.integrand, z, current_context().digits, self.kind.breakpoints, **options
            )
        return auto_quadrature(self.kind.integrand, z, current_context().digits, **options)


# -----------------------------------------------------------------------------
# Quadrature
# -----------------------------------------------------------------------------

def _node(n: int, h: mpf) -> Tuple[mpf, mpf]:
    u = n * h
    e = mp.exp(-u)
    x = mp.exp(u - e)
    return x, x * (1 + e)


def _directional_sum(
    f: RealFunction,
    z: mpc,
    h: mpf,
    start: int,
    stride: int,
    floor: mpf,
    max_terms: int,
    stop_run: int,
) -> mpc:
    total = mpc(0)
    quiet = 0
    n = start
    count = 0
    while quiet < stop_run:
        if count >= max_terms:
            raise NonConvergent(f"quadrature exceeded {max_terms} terms (h={mpmath.nstr(h, 5)})")
        x, weight = _node(n, h)
        term = weight * f(x) * mp.exp(-z * x)
        total += term
        if abs(term) <= floor * abs(total):
            quiet += 1
        else:
            quiet = 0
        n += stride
        count += 1
    return total


def de_quadrature(f: RealFunction, z: Number, params: QuadratureParams) -> mpc:
    """One trapezoidal pass with step ``params.h`` over the transformed integrand."""
    z = to_mpc(z)
    h = mpf(params.h)
    floor = mpf(10) ** params.floor_exponent
    args = (floor, params.max_terms, params.stop_run)
    forward = _directional_sum(f, z, h, 0, 1, *args)
    backward = _directional_sum(f, z, h, -1, -1, *args)
    return h * (forward + backward)


def auto_quadrature(
    f: RealFunction,
    z: Number,
    digits: int,
    h0: Union[float, str] = DEFAULT_H0,
    max_halvings: int = DEFAULT_MAX_HALVINGS,
    max_terms: int = DEFAULT_MAX_TERMS,
    stop_run: int = DEFAULT_STOP_RUN,
) -> mpc:
    """
    Halve ``h`` until two successive estimates agree to ``digits - 5`` digits.

    Each halving reuses the previous sum and adds only the new odd nodes.

    Raises:
        NonConvergent: no agreement after ``max_halvings`` halvings.
    """
    z = to_mpc(z)
    h = mpf(h0)
    params = QuadratureParams.for_digits(digits, h=h0, max_terms=max_terms, stop_run=stop_run)
    floor = mpf(10) ** params.floor_exponent
    target = mpf(10) ** (5 - digits)

    estimate = de_quadrature(f, z, params)
    for halving in range(1, max_halvings + 1):
        h /= 2
        odd = _directional_sum(f, z, h, 1, 2, floor, max_terms, stop_run)
        odd += _directional_sum(f, z, h, -1, -2, floor, max_terms, stop_run)
        refined = estimate / 2 + h * odd
        if abs(refined - estimate) <= target * abs(refined):
            logger.debug("auto_quadrature: converged after %d halvings at z=%s", halving, mpmath.nstr(z, 6))
            return refined
        estimate = refined
    raise NonConvergent(f"quadrature did not settle after {max_halvings} halvings at z={mpmath.nstr(z, 8)}")


def _shifted_integrand(t: mpf, func: RealFunction, x0: mpf) -> mpf:
    return func(x0 + t)


def _finite_piece(f: RealFunction, z: mpc, a: mpf, b: mpf, digits: int) -> mpc:
    """``int_a^b f(x) exp(-z x) dx`` by tanh-sinh, split so each cell holds half an oscillation."""
    width = b - a
    cells = max(1, int(mp.ceil(abs(z.imag) * width / mp.pi)))
    nodes = [a + width * k / cells for k in range(cells + 1)]
    value, error = mp.quad(lambda x: f(x) * mp.exp(-z * x), nodes, error=True)
    if error > mpf(10) ** (5 - digits) * max(abs(value), mpf(1)):
        raise NonConvergent(
            f"quadrature on [{mpmath.nstr(a, 6)}, {mpmath.nstr(b, 6)}] left error {mpmath.nstr(error, 3)}"
        )
    return mpc(value)


def piecewise_quadrature(
    f: RealFunction,
    z: Number,
    digits: int,
    breakpoints: Sequence[Number],
    **kwargs,
) -> mpc:
    """
    Transform of an integrand with kinks or jumps at ``breakpoints``.

    Finite cells use tanh-sinh quadrature; the tail beyond the last
    breakpoint is ``exp(-z b) * F_shifted(z)`` from ``auto_quadrature``.
    """
    z = to_mpc(z)
    cuts = sorted({mpf(b) for b in breakpoints})
    if not cuts or cuts[0] <= 0:
        raise ValueError("breakpoints must be positive")
    total = mpc(0)
    for a, b in zip([mpf(0)] + cuts[:-1], cuts):
        total += _finite_piece(f, z, a, b, digits)
    last = cuts[-1]
    tail = auto_quadrature(partial(_shifted_integrand, func=f, x0=last), z, digits, **kwargs)
    return total + mp.exp(-z * last) * tail


# -----------------------------------------------------------------------------
# Batches
# -----------------------------------------------------------------------------

def _evaluate_point(task: Tuple[int, LaplaceEvaluator, mpc, int, int]) -> Tuple[int, Optional[mpc], Optional[str]]:
    index, evaluator, z, digits, guard = task
    with PrecisionContext(digits, guard):
        try:
            return index, evaluator(z), None
        except Exception as exc:  # reported per point by the caller
            return index, None, f"{type(exc).__name__}: {exc}"


def eval_many(evaluator: LaplaceEvaluator, zs: Sequence[Number], jobs: int = 1) -> List[mpc]:
    """
    Evaluate at every point, optionally in worker processes.

    Results are in input order and do not depend on ``jobs``.

    Raises:
        EvaluationError: carrying the index of the first failing point.
    """
    ctx = current_context()
    tasks = [(i, evaluator, to_mpc(z), ctx.digits, ctx.guard_digits) for i, z in enumerate(zs)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_evaluate_point, tasks))
    else:
        outcomes = [_evaluate_point(task) for task in tasks]

    results: List[mpc] = []
    for index, value, error in sorted(outcomes, key=lambda item: item[0]):
        if error is not None:
            raise EvaluationError(index, error)
        results.append(mpc(value))
    return results
