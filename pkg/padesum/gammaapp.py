"""
Gamma and Barnes G Approximants
===============================

Approximations of ``ln Gamma(z)`` and ``ln G(z)`` on ``Re z >= 3/2`` built
from an exponential sum ``phi`` for the kernel

    f(x) = exp(-x) x^-3 (coth(x/2)/2 - 1/x - x/12)

through ``Phi(z) = sum_j c_j / (z + lambda_j)**2``. The errors are bounded by
``eps1 = sup |2 x^2 (f - phi)|`` and ``eps2 = sup |6 x (f - phi) + 2 x^2 (f' - phi')|``.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import mpmath
from mpmath import mp, mpc, mpf

from .errors import DomainError, PoleAtPoint
from .expsum import ExpSum, golden_section_max
from .polyrat import Number, PrecisionContext, to_mpc, with_precision
from .targets import TargetSpec, gamma_kernel

logger = logging.getLogger(__name__)

DOMAIN_MIN_RE = mpf(3) / 2
BOUND_X_MAX = 40
BOUND_N_GRID = 2000
BOUND_DIGITS = 50
TAIL_FACTORS = (1, 1.5, 2, 4)


@dataclass(frozen=True)
class GammaApproximant:
    """Kernel sum plus the constants and certified error levels."""

    s: ExpSum
    eps1: Optional[mpf] = None
    eps2: Optional[mpf] = None
    ln_2pi: Optional[mpf] = None
    ln_glaisher: Optional[mpf] = None

    @classmethod
    @with_precision
    def from_expsum(cls, s: ExpSum, estimate_bounds: bool = True, x_max: float = BOUND_X_MAX) -> "GammaApproximant":
        """
        Wrap a kernel sum, computing the constants at the active precision.

        ``ln A = 1/12 - zeta'(-1)`` for the Glaisher-Kinkelin constant ``A``.
        """
        g = cls(s=s, ln_2pi=mp.log(2 * mp.pi), ln_glaisher=mp.log(mp.glaisher))
        if estimate_bounds:
            eps1, eps2 = error_bounds(g, gamma_kernel(), x_max)
            g = cls(s=s, eps1=eps1, eps2=eps2, ln_2pi=g.ln_2pi, ln_glaisher=g.ln_glaisher)
        return g


def phi_cap(s: ExpSum, z: Number) -> Tuple[mpc, mpc]:
    """``(Phi(z), Phi'(z))``; raises ``PoleAtPoint`` when ``z = -lambda_j``."""
    z = to_mpc(z)
    value = mpc(0)
    deriv = mpc(0)
    for c, lam in s.terms:
        w = z + lam
        if w == 0:
            raise PoleAtPoint(f"Phi has a pole at z={mpmath.nstr(z, 10)}")
        w2 = w * w
        value += c / w2
        deriv -= 2 * c / (w2 * w)
    return value, deriv


def _check_domain(z: mpc) -> None:
    if z.real < DOMAIN_MIN_RE:
        raise DomainError(f"Re z = {mpmath.nstr(z.real, 8)} is below 3/2")


def _constants(g: GammaApproximant) -> Tuple[mpf, mpf]:
    ln_2pi = g.ln_2pi if g.ln_2pi is not None else mp.log(2 * mp.pi)
    ln_a = g.ln_glaisher if g.ln_glaisher is not None else mp.log(mp.glaisher)
    return ln_2pi, ln_a


@with_precision
def ln_gamma_hat(g: GammaApproximant, z: Number) -> mpc:
    z = to_mpc(z)
    _check_domain(z)
    ln_2pi, _ = _constants(g)
    _, dphi = phi_cap(g.s, z - 1)
    return (z - mpf(1) / 2) * mp.log(z) - z + ln_2pi / 2 + 1 / (12 * z) - dphi


@with_precision
def ln_barnesG_hat(g: GammaApproximant, z: Number) -> mpc:
    z = to_mpc(z)
    _check_domain(z)
    ln_2pi, ln_a = _constants(g)
    phi, dphi = phi_cap(g.s, z - 1)
    return (
        (z * z / 2 - z + mpf(5) / 12) * mp.log(z)
        - mpf(3) / 4 * z * z
        + ln_2pi / 2 * (z - 1)
        + z
        + mpf(1) / 12
        - ln_a
        - 1 / (12 * z)
        + phi
        - (z - 1) * dphi
    )


def _phi_and_derivative(s: ExpSum, x: mpf) -> Tuple[mpf, mpf]:
    total = mpc(0)
    deriv = mpc(0)
    for c, lam in s.terms:
        e = c * mp.exp(-lam * x)
        total += e
        deriv -= lam * e
    return total.real, deriv.real


def error_bounds(
    g: GammaApproximant,
    t: Optional[TargetSpec] = None,
    x_max: float = BOUND_X_MAX,
    n_grid: int = BOUND_N_GRID,
    digits: int = BOUND_DIGITS,
) -> Tuple[mpf, mpf]:
    """
    Estimate ``(eps1, eps2)`` as the suprema of the weighted kernel errors.

    Sampled on a uniform grid over ``[0, x_max]``, refined by golden-section
    search around the largest samples, and checked at a few points past
    ``x_max`` to cover the exponential tail.
    """
    t = t or gamma_kernel()
    if t.eval_df is None:
        raise ValueError(f"target '{t.name}' does not provide a derivative")
    with PrecisionContext(digits):

        def etas(x: mpf) -> Tuple[mpf, mpf]:
            phi, dphi = _phi_and_derivative(g.s, x)
            e = t.eval_f(x) - phi
            de = t.eval_df(x) - dphi
            return abs(2 * x * x * e), abs(6 * x * e + 2 * x * x * de)

        x_end = mpf(x_max)
        xs = [x_end * i / n_grid for i in range(n_grid + 1)]
        samples = [etas(x) for x in xs]
        bounds = []
        for which in (0, 1):
            mags = [sample[which] for sample in samples]
            best = max(mags)
            order = sorted(range(len(mags)), key=mags.__getitem__, reverse=True)[:4]
            for i in order:
                a, b = xs[max(i - 1, 0)], xs[min(i + 1, n_grid)]
                _, v = golden_section_max(lambda x: etas(x)[which], a, b, 1e-6)
                best = max(best, v)
            for factor in TAIL_FACTORS:
                best = max(best, etas(x_end * mpf(factor))[which])
            bounds.append(best)
    logger.info("error_bounds: eps1=%s eps2=%s", mpmath.nstr(bounds[0], 4), mpmath.nstr(bounds[1], 4))
    return bounds[0], bounds[1]
