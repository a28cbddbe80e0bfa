"""
Multi-point Pade Solver
=======================

Builds the rational function ``R = N/D`` with ``deg N <= M-1``, ``deg D = M``
that interpolates prescribed values at ``p`` finite points and matches
``n_inf`` coefficients of an expansion at infinity, ``p + n_inf = 2M``.

The construction is a continued fraction in the finite points, obtained by
descending the interpolation values and the series at infinity one point at
a time, closed by a continued fraction in ``w = 1/z`` for the remaining
series coefficients.
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Sequence, Tuple

import mpmath
from mpmath import mpc, mpf

from .errors import (
    DegenerateSeries,
    PadesumError,
    PoleAtPoint,
    VerificationFailed,
    ZeroInterpolant,
)
from .polyrat import (
    Number,
    Polynomial,
    RationalFunction,
    current_context,
    poly_add,
    poly_mul,
    poly_scale,
    rat_eval,
    series_at_infinity,
    to_mpc,
    with_precision,
)

logger = logging.getLogger(__name__)


# -----------------------------------------------------------------------------
# Types
# -----------------------------------------------------------------------------

@dataclass(frozen=True)
class PadeProblem:
    """
    Interpolation data.

    ``xi`` holds the coefficients of ``R(z) ~ sum_j xi[j] z**-(j+1)`` at
    infinity. Points and values must be conjugate-symmetric
    (``z_{p+1-j} = conj z_j``) and points must satisfy ``Re z >= 0``.
    """

    points: Tuple[mpc, ...]
    values: Tuple[mpc, ...]
    xi: Tuple[mpc, ...]
    M: int

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(to_mpc(z) for z in self.points))
        object.__setattr__(self, "values", tuple(to_mpc(a) for a in self.values))
        object.__setattr__(self, "xi", tuple(to_mpc(x) for x in self.xi))
        self._validate()

    @classmethod
    def build(cls, points: Sequence[Number], values: Sequence[Number], xi: Sequence[Number]) -> "PadeProblem":
        total = len(points) + len(xi)
        if total % 2:
            raise ValueError(f"p + n_inf must be even, got {len(points)} + {len(xi)}")
        return cls(tuple(points), tuple(values), tuple(xi), total // 2)

    @property
    def p(self) -> int:
        return len(self.points)

    @property
    def n_inf(self) -> int:
        return len(self.xi)

    def _validate(self) -> None:
        p, n = self.p, self.n_inf
        if len(self.values) != p:
            raise ValueError(f"{p} points but {len(self.values)} values")
        if n < 1:
            raise ValueError("n_inf must be >= 1")
        if p < 2:
            raise ValueError("at least two finite points are required")
        if p + n != 2 * self.M or self.M < 1:
            raise ValueError(f"p + n_inf must equal 2M (p={p}, n_inf={n}, M={self.M})")
        if self.xi[0] == 0:
            raise ValueError("xi[0] must be nonzero")
        tol = mpf(10) ** (-mpf(current_context().digits) / 2)
        for j in range(p):
            z, a = self.points[j], self.values[j]
            if z.real < -tol:
                raise ValueError(f"point {j} has negative real part")
            zc, ac = self.points[p - 1 - j], self.values[p - 1 - j]
            if abs(zc - z.conjugate()) > tol * (1 + abs(z)):
                raise ValueError(f"points are not conjugate-symmetric at index {j}")
            if abs(ac - a.conjugate()) > tol * (1 + abs(a)):
                raise ValueError(f"values are not conjugate-symmetric at index {j}")
        for i in range(p):
            for j in range(i + 1, p):
                if self.points[i] == self.points[j]:
                    raise ValueError(f"points {i} and {j} coincide")


@dataclass(frozen=True)
class DescentState:
    """Snapshot of the descent after ``level`` finite points were absorbed."""

    level: int
    gamma: Tuple[mpc, ...]
    pending: Tuple[Tuple[mpc, mpc], ...]


@dataclass(frozen=True)
class ContinuedFraction:
    """
    ``R(z) = head / (1 + (z - z_1) R_1)``,
    ``R_{j-1} = a_j / (1 + (z - z_j) R_j)`` down to ``R_p``, the terminal
    fraction in ``w = 1/z``:
    ``R_p = c0 + d_1 w / (1 + d_2 w / (1 + ... / (1 + d_K w)))``.

    ``stages`` holds ``(z_j, a_{j+1})`` for ``j = 1..p-1``.
    """

    head: mpc
    stages: Tuple[Tuple[mpc, mpc], ...]
    last_point: mpc
    terminal_constant: mpc
    terminal_d: Tuple[mpc, ...] = field(default_factory=tuple)

    @property
    def K(self) -> int:
        return len(self.terminal_d)

    @property
    def points(self) -> List[mpc]:
        return [z for z, _ in self.stages] + [self.last_point]

    @property
    def stage_values(self) -> List[mpc]:
        return [self.head] + [a for _, a in self.stages]


# -----------------------------------------------------------------------------
# Points
# -----------------------------------------------------------------------------

def build_points(p: int, A: Number, B: Number) -> List[mpc]:
    """
    ``p`` conjugate-symmetric points on the segment ``A-Bi -> 0 -> A+Bi``.

    With ``t_j = (j-1)/(p-1)``: ``(1-2t)(A-Bi)`` for ``t <= 1/2``, else
    ``(2t-1)(A+Bi)``. Odd ``p`` places the middle point at 0.
    """
    if p < 2:
        raise ValueError("p must be >= 2")
    A = mpf(A)
    B = mpf(B)
    if A < 0 or B <= 0:
        raise ValueError("need A >= 0 and B > 0")
    lower = mpc(A, -B)
    upper = mpc(A, B)
    points = []
    for j in range(p):
        t = Fraction(j, p - 1)
        if t <= Fraction(1, 2):
            s = 1 - 2 * t
            points.append(mpf(s.numerator) / s.denominator * lower)
        else:
            s = 2 * t - 1
            points.append(mpf(s.numerator) / s.denominator * upper)
    return points


# -----------------------------------------------------------------------------
# Descent steps
# -----------------------------------------------------------------------------

def series_descend_case1(b: Sequence[mpc], z1: mpc, a1: mpc, k: int) -> List[mpc]:
    """
    Series of ``R1`` where ``R = a1 / (1 + (z - z1) R1)`` and ``b`` (with
    ``b[0] = 0``) is the series of ``R`` at infinity. Returns ``k`` terms.
    """
    if len(b) < k + 1:
        raise ValueError(f"need {k + 1} input coefficients, got {len(b)}")
    if b[0] != 0:
        raise ValueError("case 1 requires b[0] == 0")
    b1 = b[1]
    if b1 == 0:
        raise DegenerateSeries("b[0] and b[1] are both zero")
    out: List[mpc] = [a1 / b1]
    for n in range(1, k):
        acc = b[n]
        for i in range(n):
            acc += out[i] * (b[n + 1 - i] - z1 * b[n - i])
        out.append(-acc / b1)
    return out


def series_descend_case2(b: Sequence[mpc], z1: mpc, a1: mpc, k: int) -> List[mpc]:
    """As case 1 for ``b[0] != 0``. Returns ``k + 1`` terms, the first being 0."""
    if len(b) < k:
        raise ValueError(f"need {k} input coefficients, got {len(b)}")
    b0 = b[0]
    if b0 == 0:
        raise ValueError("case 2 requires b[0] != 0")
    out: List[mpc] = [mpc(0), a1 / b0 - 1]
    for n in range(1, k):
        acc = b[n]
        for i in range(1, n + 1):
            acc += out[i] * (b[n + 1 - i] - z1 * b[n - i])
        out.append(-acc / b0)
    return out


def _is_zero(a: mpc, scale: mpf) -> bool:
    return a == 0 or abs(a) <= current_context().tolerance(0) * scale


def value_descend(
    values: Sequence[Tuple[mpc, mpc]], z_l: mpc, a_l: mpc
) -> List[Tuple[mpc, mpc]]:
    """Map each ``(z_j, a_j)`` to ``(z_j, (a_l/a_j - 1) / (z_j - z_l))``."""
    scale = abs(a_l)
    if a_l == 0:
        raise ZeroInterpolant("descended value at the current point is zero")
    out = []
    for z_j, a_j in values:
        if _is_zero(a_j, scale):
            raise ZeroInterpolant(f"descended value at z={mpmath.nstr(z_j, 8)} is zero")
        if z_j == z_l:
            raise ValueError("interpolation points must be distinct")
        out.append((z_j, (a_l / a_j - 1) / (z_j - z_l)))
    return out


def _reciprocal_series(t: Sequence[mpc]) -> List[mpc]:
    inv = [1 / t[0]]
    for i in range(1, len(t)):
        acc = mpc(0)
        for j in range(1, i + 1):
            acc += t[j] * inv[i - j]
        inv.append(-acc * inv[0])
    return inv


def terminal_cf(gamma: Sequence[mpc], K: int) -> Tuple[mpc, List[mpc]]:
    """
    Continued fraction in ``w`` matching ``gamma[0..K]``.

    Returns:
        ``(gamma[0], [d_1..d_K])``.

    Raises:
        ValueError: ``K`` odd or too few coefficients.
        DegenerateSeries: an intermediate ``d_m`` (``m < K``) is zero.
    """
    if K % 2 or K < 0:
        raise ValueError(f"K must be even and >= 0, got {K}")
    if len(gamma) < K + 1:
        raise ValueError(f"need {K + 1} coefficients, got {len(gamma)}")
    constant = gamma[0]
    series = list(gamma[: K + 1])
    d: List[mpc] = []
    for m in range(1, K + 1):
        d_m = series[1]
        d.append(d_m)
        if m == K:
            break
        if d_m == 0:
            raise DegenerateSeries(f"terminal coefficient d_{m} is zero")
        series = [d_m * c for c in _reciprocal_series(series[1:])]
        series[0] = mpc(1)
    return constant, d


# -----------------------------------------------------------------------------
# Descent and assembly
# -----------------------------------------------------------------------------

def descend(problem: PadeProblem) -> Tuple[ContinuedFraction, List[DescentState]]:
    """Run the full descent; returns the continued fraction and every level."""
    p, n_inf = problem.p, problem.n_inf
    gamma: List[mpc] = [mpc(0)] + list(problem.xi)
    pending = list(zip(problem.points, problem.values))
    trace = [DescentState(0, tuple(gamma), tuple(pending))]
    absorbed: List[mpc] = []

    for level in range(p):
        z_l, a_l = pending[0]
        if _is_zero(a_l, max(abs(a) for _, a in pending)):
            raise ZeroInterpolant(f"value at level {level} is zero")
        if level % 2 == 0:
            gamma = series_descend_case1(gamma, z_l, a_l, len(gamma) - 1)
        else:
            gamma = series_descend_case2(gamma, z_l, a_l, len(gamma))
        pending = value_descend(pending[1:], z_l, a_l)
        absorbed.append(a_l)
        trace.append(DescentState(level + 1, tuple(gamma), tuple(pending)))

    K = n_inf if p % 2 == 0 else n_inf - 1
    if len(gamma) != K + 1:
        raise RuntimeError(f"descended series has {len(gamma)} terms, expected {K + 1}")
    constant, d = terminal_cf(gamma, K)
    cf = ContinuedFraction(
        head=absorbed[0],
        stages=tuple(zip(problem.points[:-1], absorbed[1:])),
        last_point=problem.points[-1],
        terminal_constant=constant,
        terminal_d=tuple(d),
    )
    logger.debug("descend: p=%d n_inf=%d K=%d", p, n_inf, K)
    return cf, trace


def assemble(cf: ContinuedFraction) -> RationalFunction:
    """Collapse the continued fraction into ``N/D`` with a monic denominator."""
    K = cf.K
    # Three-term recurrences for the terminal fraction in w.
    a_prev, a_cur = Polynomial((1,)), Polynomial((cf.terminal_constant,))
    b_prev, b_cur = Polynomial(), Polynomial((1,))
    shift = Polynomial((0, 1))
    for d_m in cf.terminal_d:
        step = poly_scale(shift, d_m)
        a_prev, a_cur = a_cur, poly_add(a_cur, poly_mul(step, a_prev))
        b_prev, b_cur = b_cur, poly_add(b_cur, poly_mul(step, b_prev))

    half = K // 2
    num = _w_to_z(a_cur, half)
    den = _w_to_z(b_cur, half)

    for z_j, a_j in zip(reversed(cf.points), reversed(cf.stage_values)):
        linear = Polynomial((-z_j, 1))
        num, den = poly_scale(den, a_j), poly_add(den, poly_mul(linear, num))
    return RationalFunction(num, den).normalized()


def _w_to_z(poly_w: Polynomial, degree: int) -> Polynomial:
    coeffs = list(poly_w.coeffs) + [mpc(0)] * (degree + 1 - len(poly_w.coeffs))
    if len(coeffs) > degree + 1:
        raise RuntimeError("terminal polynomial exceeds its expected degree")
    return Polynomial(tuple(reversed(coeffs)))


# -----------------------------------------------------------------------------
# Solve
# -----------------------------------------------------------------------------

def interpolation_residual(problem: PadeProblem, r: RationalFunction) -> mpf:
    """Largest relative mismatch over the finite points and the series at infinity."""
    worst = mpf(0)
    for z, a in zip(problem.points, problem.values):
        worst = max(worst, abs(rat_eval(r, z) - a) / (1 + abs(a)))
    expected = [mpc(0)] + list(problem.xi)
    got = series_at_infinity(r, len(expected))
    for g, e in zip(got, expected):
        worst = max(worst, abs(g - e) / (1 + abs(e)))
    return worst


@with_precision
def solve(problem: PadeProblem) -> RationalFunction:
    """
    Solve the interpolation problem and verify the result.

    Raises:
        DegenerateSeries, ZeroInterpolant: the descent broke down.
        VerificationFailed: the result misses the data beyond ``10**(-digits/2)``
            or has the wrong degree.
    """
    cf, _ = descend(problem)
    r = assemble(cf)

    if r.den.degree != problem.M or r.num.degree > problem.M - 1:
        raise VerificationFailed(
            f"degrees [{r.num.degree}/{r.den.degree}] differ from [{problem.M - 1}/{problem.M}]"
        )
    tol = mpf(10) ** (-mpf(current_context().digits) / 2)
    try:
        residual = interpolation_residual(problem, r)
    except (PoleAtPoint, PadesumError) as exc:
        raise VerificationFailed(f"verification could not evaluate R: {exc}") from exc
    if residual > tol:
        raise VerificationFailed(
            f"interpolation residual {mpmath.nstr(residual, 5)} above {mpmath.nstr(tol, 3)}"
        )
    logger.debug("solve: M=%d residual=%s", problem.M, mpmath.nstr(residual, 5))
    return r
