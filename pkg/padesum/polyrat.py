"""
Polynomial and Rational Arithmetic
==================================

Arbitrary-precision complex polynomials and rational functions:

- precision management (``PrecisionContext``)
- products and Horner evaluation
- simultaneous root finding (Ehrlich-Aberth)
- expansion at infinity and partial fractions with simple poles

All arithmetic runs on ``mpmath`` numbers at the active working precision.
"""

import contextvars
import functools
import logging
import os
import re
from dataclasses import dataclass
from typing import Any, Callable, List, Optional, Sequence, Tuple, TypeVar, Union

import mpmath
from mpmath import mp, mpc, mpf

from .errors import (
    DivergentAtInfinity,
    MultiplePole,
    NonConvergence,
    PoleAtPoint,
    PrecisionError,
)

logger = logging.getLogger(__name__)

APComplex = mpc
Number = Union[int, float, str, mpf, mpc, complex]

MIN_DIGITS = 32
DEFAULT_DIGITS = 100
GUARD_DIGITS = 10
ROOT_MAX_ITER = 500

F = TypeVar("F", bound=Callable[..., Any])


# -----------------------------------------------------------------------------
# Precision
# -----------------------------------------------------------------------------

_ACTIVE: contextvars.ContextVar = contextvars.ContextVar("padesum_precision", default=None)
# (token, saved dps) per entry, innermost last; local to the thread or task.
_SAVED: contextvars.ContextVar = contextvars.ContextVar("padesum_saved_dps", default=())


@dataclass
class PrecisionContext:
    """
    Working precision for a block of computation.

    ``digits`` is the accuracy the caller asks for; arithmetic runs with
    ``digits + guard_digits`` decimal digits. Use as a context manager::

        with PrecisionContext(100):
            roots = poly_roots(p)
    """

    digits: int = DEFAULT_DIGITS
    guard_digits: int = GUARD_DIGITS

    def __post_init__(self):
        if int(self.digits) < MIN_DIGITS:
            raise PrecisionError(f"digits must be >= {MIN_DIGITS}, got {self.digits}")
        if int(self.guard_digits) < 0:
            raise PrecisionError(f"guard_digits must be >= 0, got {self.guard_digits}")
        self.digits = int(self.digits)
        self.guard_digits = int(self.guard_digits)

    @property
    def working_dps(self) -> int:
        return self.digits + self.guard_digits

    def tolerance(self, slack: int = 0) -> mpf:
        """``10**(slack - digits)`` at the current precision."""
        return mpf(10) ** (slack - self.digits)

    def __enter__(self) -> "PrecisionContext":
        saved = mp.dps
        mp.dps = self.working_dps
        token = _ACTIVE.set(self)
        _SAVED.set(_SAVED.get() + ((token, saved),))
        return self

    def __exit__(self, *exc) -> None:
        stack = _SAVED.get()
        token, saved = stack[-1]
        _SAVED.set(stack[:-1])
        _ACTIVE.reset(token)
        mp.dps = saved


def default_digits() -> int:
    """Digits used when no context is active (``EXPSUM_DIGITS`` or 100)."""
    value = os.getenv("EXPSUM_DIGITS")
    if value:
        try:
            return int(value)
        except ValueError:
            logger.warning("Ignoring non-integer EXPSUM_DIGITS=%r", value)
    return DEFAULT_DIGITS


def current_context() -> PrecisionContext:
    """The innermost active context, or a default one (not entered)."""
    ctx = _ACTIVE.get()
    if ctx is None:
        ctx = PrecisionContext(default_digits())
    return ctx


def with_precision(func: F) -> F:
    """Run ``func`` inside a default context unless one is already active."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        if _ACTIVE.get() is not None:
            return func(*args, **kwargs)
        with PrecisionContext(default_digits()):
            return func(*args, **kwargs)

    return wrapper  # type: ignore[return-value]


def to_mpc(value: Number) -> mpc:
    if isinstance(value, str):
        return parse_apcomplex(value)
    return mpc(value)


# -----------------------------------------------------------------------------
# Text form
# -----------------------------------------------------------------------------

_NUM = r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
_COMPLEX_RE = re.compile(rf"^\s*([+-]?{_NUM})\s*([+-]\s*{_NUM})\s*[ij]\s*$")
_IMAG_RE = re.compile(rf"^\s*([+-]?{_NUM})\s*[ij]\s*$")
_REAL_RE = re.compile(rf"^\s*([+-]?{_NUM})\s*$")


def _repr_digits() -> int:
    return mpmath.libmp.prec_to_dps(mp.prec) + 3


def format_mpf(x: Number, digits: Optional[int] = None) -> str:
    """Scientific-notation text of a real number, exact at the current precision."""
    n = digits or _repr_digits()
    return mpmath.nstr(mpf(x), n, min_fixed=0, max_fixed=0, strip_zeros=True)


def format_apcomplex(z: Number, digits: Optional[int] = None) -> str:
    """Format as ``re±im i`` (e.g. ``1.5e+0-2.0e-1i``)."""
    z = mpc(z)
    re_text = format_mpf(z.real, digits)
    im_text = format_mpf(z.imag, digits)
    if not im_text.startswith("-"):
        im_text = "+" + im_text
    return f"{re_text}{im_text}i"


def parse_apcomplex(text: str) -> mpc:
    """Parse the ``re±im i`` form (a bare real or imaginary part is accepted)."""
    match = _COMPLEX_RE.match(text)
    if match:
        return mpc(mpf(match.group(1)), mpf(match.group(2).replace(" ", "")))
    match = _IMAG_RE.match(text)
    if match:
        return mpc(0, mpf(match.group(1)))
    match = _REAL_RE.match(text)
    if match:
        return mpc(mpf(match.group(1)), 0)
    raise ValueError(f"not a complex number: {text!r}")


# -----------------------------------------------------------------------------
# Types
# -----------------------------------------------------------------------------

@dataclass(frozen=True)
class Polynomial:
    """Dense polynomial, coefficients in ascending powers. Zero has degree -1."""

    coeffs: Tuple[mpc, ...] = ()

    def __post_init__(self):
        coeffs = [to_mpc(c) for c in self.coeffs]
        while coeffs and coeffs[-1] == 0:
            coeffs.pop()
        object.__setattr__(self, "coeffs", tuple(coeffs))

    @classmethod
    def from_roots(cls, roots: Sequence[Number], lead: Number = 1) -> "Polynomial":
        result = cls((lead,))
        for r in roots:
            result = poly_mul(result, cls((-to_mpc(r), 1)))
        return result

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def lead(self) -> mpc:
        if not self.coeffs:
            raise ValueError("zero polynomial has no leading coefficient")
        return self.coeffs[-1]

    def is_zero(self) -> bool:
        return not self.coeffs

    def __call__(self, z: Number) -> mpc:
        return poly_eval(self, z)

    def __add__(self, other: "Polynomial") -> "Polynomial":
        return poly_add(self, other)

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        return poly_add(self, poly_scale(other, -1))

    def __mul__(self, other: "Polynomial") -> "Polynomial":
        return poly_mul(self, other)


@dataclass(frozen=True)
class RationalFunction:
    """``num / den`` with a nonzero denominator."""

    num: Polynomial
    den: Polynomial

    def __post_init__(self):
        if self.den.is_zero():
            raise ValueError("denominator must be nonzero")

    def normalized(self) -> "RationalFunction":
        """Scale so the denominator is monic."""
        lead = self.den.lead
        return RationalFunction(poly_scale(self.num, 1 / lead), poly_scale(self.den, 1 / lead))

    @property
    def degrees(self) -> Tuple[int, int]:
        return self.num.degree, self.den.degree

    def __call__(self, z: Number) -> mpc:
        return rat_eval(self, z)


# -----------------------------------------------------------------------------
# Basic operations
# -----------------------------------------------------------------------------

def poly_add(p: Polynomial, q: Polynomial) -> Polynomial:
    n = max(len(p.coeffs), len(q.coeffs))
    a = list(p.coeffs) + [mpc(0)] * (n - len(p.coeffs))
    b = list(q.coeffs) + [mpc(0)] * (n - len(q.coeffs))
    return Polynomial(tuple(x + y for x, y in zip(a, b)))


def poly_scale(p: Polynomial, factor: Number) -> Polynomial:
    factor = to_mpc(factor)
    return Polynomial(tuple(c * factor for c in p.coeffs))


def poly_mul(p: Polynomial, q: Polynomial) -> Polynomial:
    if p.is_zero() or q.is_zero():
        return Polynomial()
    out = [mpc(0)] * (len(p.coeffs) + len(q.coeffs) - 1)
    for i, a in enumerate(p.coeffs):
        if a == 0:
            continue
        for j, b in enumerate(q.coeffs):
            out[i + j] += a * b
    return Polynomial(tuple(out))


def poly_deriv(p: Polynomial) -> Polynomial:
    return Polynomial(tuple(k * c for k, c in enumerate(p.coeffs) if k > 0))


def poly_eval(p: Polynomial, z: Number) -> mpc:
    """Horner evaluation."""
    z = to_mpc(z)
    acc = mpc(0)
    for c in reversed(p.coeffs):
        acc = acc * z + c
    return acc


def _eval_with_deriv(coeffs: Sequence[mpc], z: mpc) -> Tuple[mpc, mpc]:
    value = mpc(0)
    deriv = mpc(0)
    for c in reversed(coeffs):
        deriv = deriv * z + value
        value = value * z + c
    return value, deriv


def _magnitude_bound(coeffs: Sequence[mpc], z: mpc) -> mpf:
    """``sum |a_k| |z|^k``, the scale of rounding error in ``p(z)``."""
    r = abs(z)
    acc = mpf(0)
    for c in reversed(coeffs):
        acc = acc * r + abs(c)
    return acc


# -----------------------------------------------------------------------------
# Roots
# -----------------------------------------------------------------------------

def root_radius_bound(p: Polynomial) -> mpf:
    """
    Fujiwara's bound ``2 max |a_{n-k}/a_n|^(1/k)`` on the root moduli
    (the ``k = n`` term uses ``a_0 / 2``). Radius of the starting circle.
    """
    a = p.coeffs
    n = p.degree
    lead = abs(a[-1])
    best = mpf(0)
    for k in range(1, n + 1):
        c = abs(a[n - k]) / lead
        if k == n:
            c /= 2
        if c:
            best = max(best, c ** (mpf(1) / k))
    return 2 * best if best else mpf(1)


@with_precision
def poly_roots(p: Polynomial, max_iter: int = ROOT_MAX_ITER) -> List[mpc]:
    """
    All complex roots of ``p`` with multiplicity, via Ehrlich-Aberth.

    Args:
        p: Polynomial of degree >= 1.
        max_iter: Sweep cap before the residual acceptance test.

    Returns:
        Roots sorted by real then imaginary part.

    Raises:
        ValueError: ``p`` is constant.
        NonConvergence: a root fails ``|p(r)| <= 10**(10-digits) * sum |a_k||r|^k``.
    """
    n = p.degree
    if n < 1:
        raise ValueError("poly_roots requires degree >= 1")
    ctx = current_context()
    a = p.coeffs
    if n == 1:
        return [-a[0] / a[1]]

    radius = root_radius_bound(p)
    two_pi = 2 * mp.pi
    roots = [
        radius * mpmath.expj(two_pi * (k + mpf(1) / 4) / n + mpf(1) / (10 * n * (k + 1)))
        for k in range(n)
    ]
    frozen = [False] * n
    step_tol = ctx.tolerance(5)

    sweeps = 0
    for sweeps in range(1, max_iter + 1):
        for i in range(n):
            if frozen[i]:
                continue
            zi = roots[i]
            value, deriv = _eval_with_deriv(a, zi)
            if value == 0:
                frozen[i] = True
                continue
            if deriv == 0:
                roots[i] = zi * mpc(1, mpf(10) ** -5) + mpf(10) ** -5
                continue
            ratio = value / deriv
            repulsion = mpc(0)
            for j in range(n):
                if j != i:
                    diff = zi - roots[j]
                    if diff != 0:
                        repulsion += 1 / diff
            correction = ratio / (1 - ratio * repulsion)
            roots[i] = zi - correction
            if abs(correction) <= step_tol * max(abs(roots[i]), step_tol):
                frozen[i] = True
        if all(frozen):
            break

    accept = ctx.tolerance(10)
    for r in roots:
        residual = abs(poly_eval(p, r))
        if residual > accept * _magnitude_bound(a, r):
            raise NonConvergence(
                f"root iteration did not converge after {sweeps} sweeps "
                f"(degree {n}, residual {mpmath.nstr(residual, 5)})"
            )
    logger.debug("poly_roots: degree %d converged in %d sweeps", n, sweeps)
    return sorted(roots, key=lambda r: (float(r.real), float(r.imag)))


# -----------------------------------------------------------------------------
# Rational functions
# -----------------------------------------------------------------------------

def rat_eval(r: RationalFunction, z: Number) -> mpc:
    """Evaluate ``r`` at ``z``; raises ``PoleAtPoint`` where the denominator vanishes."""
    z = to_mpc(z)
    den = poly_eval(r.den, z)
    scale = _magnitude_bound(r.den.coeffs, z)
    if den == 0 or abs(den) <= mpf(10) ** (-mp.dps) * scale:
        raise PoleAtPoint(f"denominator vanishes at z={mpmath.nstr(z, 10)}")
    return poly_eval(r.num, z) / den


def series_at_infinity(r: RationalFunction, n: int) -> List[mpc]:
    """
    First ``n`` coefficients of ``r`` in powers of ``w = 1/z``.

    Raises:
        DivergentAtInfinity: ``deg num > deg den``.
    """
    m = r.den.degree
    if r.num.degree > m:
        raise DivergentAtInfinity(
            f"numerator degree {r.num.degree} exceeds denominator degree {m}"
        )
    # In w, z^m * P(1/w) has coefficient P_k at w^(m-k).
    num_w = [mpc(0)] * (m + 1)
    for k, c in enumerate(r.num.coeffs):
        num_w[m - k] = c
    den_w = [r.den.coeffs[m - i] for i in range(m + 1)]

    out: List[mpc] = []
    for i in range(n):
        acc = num_w[i] if i <= m else mpc(0)
        for j in range(1, min(i, m) + 1):
            acc -= den_w[j] * out[i - j]
        out.append(acc / den_w[0])
    return out


@with_precision
def partial_fractions(r: RationalFunction) -> List[Tuple[mpc, mpc]]:
    """
    Decompose a strictly proper ``r`` into ``sum residue / (z - pole)``.

    Returns:
        ``(residue, pole)`` pairs, one per root of the denominator.

    Raises:
        ValueError: ``r`` is not strictly proper.
        MultiplePole: two poles closer than ``10**(-digits/2) * max|pole|``.
    """
    if r.num.degree >= r.den.degree:
        raise ValueError(
            f"partial fractions need deg num < deg den, got {r.num.degree} >= {r.den.degree}"
        )
    ctx = current_context()
    poles = poly_roots(r.den)
    scale = max(abs(z) for z in poles)
    if scale == 0:
        scale = mpf(1)
    threshold = mpf(10) ** (-mpf(ctx.digits) / 2) * scale
    for i in range(len(poles)):
        for j in range(i + 1, len(poles)):
            if abs(poles[i] - poles[j]) <= threshold:
                raise MultiplePole(
                    f"poles {mpmath.nstr(poles[i], 8)} and {mpmath.nstr(poles[j], 8)} coincide"
                )
    deriv = poly_deriv(r.den)
    return [(poly_eval(r.num, z) / poly_eval(deriv, z), z) for z in poles]
