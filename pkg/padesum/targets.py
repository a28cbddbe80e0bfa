"""
Target Functions
================

Catalog of functions to approximate. Each ``TargetSpec`` bundles point
evaluation, Taylor coefficients ``xi_j = f^(j)(0+)``, a Laplace evaluator
and an optional post-transform.

Targets with ``NegateDerivative`` approximate the tail integral
``F(x) = int_x^inf g`` of a user-facing function ``g``; the exponential sum
for ``g`` is then the negated derivative of the one for ``F``.

All callables are module-level functions or ``functools.partial`` objects
with string parameters, so specs can be shipped to worker processes.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache, partial
from typing import Callable, Dict, List, Optional, Tuple

import mpmath
from mpmath import mp, mpc, mpf

from .errors import UnknownTarget
from .laplace import LaplaceEvaluator, auto_quadrature
from .polyrat import Number, current_context, to_mpc

logger = logging.getLogger(__name__)

GAMMA_KERNEL_MAX_TAYLOR = 40


class PostTransform(str, Enum):
    IDENTITY = "identity"
    NEGATE_DERIVATIVE = "negate_derivative"


@dataclass(frozen=True)
class TargetSpec:
    """
    A function to approximate.

    Attributes:
        name: Registry name.
        eval_f: ``x -> f(x)`` for the function whose transform is matched.
        taylor: ``n -> [xi_0 .. xi_{n-1}]``.
        laplace: Transform of ``eval_f``.
        post_transform: ``IDENTITY`` or ``NEGATE_DERIVATIVE``.
        eval_g: User-facing ``g = -f'`` for ``NEGATE_DERIVATIVE`` targets.
        eval_df: ``f'`` where available (needed by the Gamma error bounds).
        x_max: Default truncation of the error grid.
        params: Parameters as given, for manifests.
        max_taylor: Largest supported ``n`` for ``taylor``.
    """

    name: str
    eval_f: Callable[[mpf], mpf]
    taylor: Callable[[int], List[mpf]]
    laplace: LaplaceEvaluator
    post_transform: PostTransform = PostTransform.IDENTITY
    eval_g: Optional[Callable[[mpf], mpf]] = None
    eval_df: Optional[Callable[[mpf], mpf]] = None
    x_max: float = 12.0
    params: Tuple[Tuple[str, str], ...] = field(default_factory=tuple)
    max_taylor: Optional[int] = None

    @property
    def user_function(self) -> Callable[[mpf], mpf]:
        """The function the final exponential sum approximates."""
        if self.post_transform is PostTransform.NEGATE_DERIVATIVE:
            return self.eval_g
        return self.eval_f

    @property
    def param_dict(self) -> Dict[str, str]:
        return dict(self.params)


def taylor_coeffs(t: TargetSpec, n: int) -> List[mpf]:
    if n < 1:
        raise ValueError("need at least one Taylor coefficient")
    if t.max_taylor is not None and n > t.max_taylor:
        raise ValueError(f"{t.name} supports at most {t.max_taylor} Taylor coefficients")
    return t.taylor(n)


def eval_target(t: TargetSpec, x: Number) -> mpf:
    x = mpf(x)
    if x < 0:
        raise ValueError("targets are defined for x >= 0")
    return t.eval_f(x)


def laplace_target(t: TargetSpec, z: Number) -> mpc:
    return t.laplace(to_mpc(z))


def _param(text: str) -> mpf:
    """Decimal string, optionally as a power ``base^exponent``."""
    text = str(text).strip()
    if "^" in text:
        base, exponent = text.split("^", 1)
        return mpf(base) ** mpf(exponent)
    return mpf(text)


# -----------------------------------------------------------------------------
# Gaussian
# -----------------------------------------------------------------------------

def _gaussian_f(x: mpf) -> mpf:
    return mp.exp(-x * x)


def _gaussian_taylor(n: int) -> List[mpf]:
    out = []
    for j in range(n):
        if j % 2:
            out.append(mpf(0))
        else:
            k = j // 2
            out.append((-1) ** k * mp.factorial(2 * k) / mp.factorial(k))
    return out


def gaussian() -> TargetSpec:
    return TargetSpec(
        name="gaussian",
        eval_f=_gaussian_f,
        taylor=_gaussian_taylor,
        laplace=LaplaceEvaluator.numeric(_gaussian_f),
        x_max=12.0,
    )


# -----------------------------------------------------------------------------
# Gamma kernel: f(x) = exp(-x) x^-3 (coth(x/2)/2 - 1/x - x/12)
# -----------------------------------------------------------------------------

@lru_cache(maxsize=8)
def _kernel_series(dps: int, count: int) -> Tuple[mpf, ...]:
    """``s_m = B_{2m+4} / (2m+4)!`` for ``m < count``."""
    with mp.workdps(dps):
        return tuple(mp.bernoulli(2 * m + 4) / mp.factorial(2 * m + 4) for m in range(count))


def _kernel_s(x: mpf, derivative: bool = False) -> Tuple[mpf, mpf]:
    """``s(x)`` and ``s'(x)`` from the even power series (``|x| < 2 pi``)."""
    floor = mpf(10) ** (-mp.dps - 5)
    count = 16
    while True:
        coeffs = _kernel_series(mp.dps, count)
        s = mpf(0)
        ds = mpf(0)
        x2 = x * x
        power = mpf(1)
        previous = mpf(0)
        done = False
        for m, c in enumerate(coeffs):
            term = c * power
            s += term
            if derivative and m > 0:
                ds += 2 * m * c * x * previous
            if m > 2 and abs(term) <= floor * abs(s):
                done = True
                break
            previous = power
            power *= x2
        if done:
            return s, ds
        count *= 2


def _kernel_b(x: mpf) -> mpf:
    return mp.coth(x / 2) / 2 - 1 / x - x / 12


def _gamma_kernel_f(x: mpf) -> mpf:
    if x < 1:
        s, _ = _kernel_s(x)
        return mp.exp(-x) * s
    with mp.extradps(10):
        return mp.exp(-x) * _kernel_b(x) / x**3


def _gamma_kernel_df(x: mpf) -> mpf:
    if x < 1:
        s, ds = _kernel_s(x, derivative=True)
        return mp.exp(-x) * (ds - s)
    with mp.extradps(10):
        b = _kernel_b(x)
        db = -mp.csch(x / 2) ** 2 / 4 + 1 / x**2 - mpf(1) / 12
        return mp.exp(-x) / x**3 * (db - b - 3 * b / x)


def _gamma_kernel_taylor(n: int) -> List[mpf]:
    series = _kernel_series(mp.dps, n // 2 + 1)
    out = []
    for j in range(n):
        acc = mpf(0)
        for m in range(j // 2 + 1):
            i = j - 2 * m
            acc += (-1) ** i / mp.factorial(i) * series[m]
        out.append(mp.factorial(j) * acc)
    return out


def gamma_kernel() -> TargetSpec:
    return TargetSpec(
        name="gamma_kernel",
        eval_f=_gamma_kernel_f,
        taylor=_gamma_kernel_taylor,
        laplace=LaplaceEvaluator.numeric(_gamma_kernel_f),
        eval_df=_gamma_kernel_df,
        x_max=12.0,
        max_taylor=GAMMA_KERNEL_MAX_TAYLOR,
    )


# -----------------------------------------------------------------------------
# Gompertz-Makeham density
# -----------------------------------------------------------------------------

GOMPERTZ_DEFAULTS = {"x0": "65", "a": "0.0007", "b": "0.00005", "c": "10^0.04"}


def _gompertz_constants(x0: str, a: str, b: str, c: str) -> Tuple[mpf, mpf, mpf, mpf]:
    a_v, b_v, c_v = _param(a), _param(b), _param(c)
    log_c = mp.log(c_v)
    scale = b_v * c_v ** _param(x0)
    return a_v, scale, log_c, scale / log_c


def _gompertz_f(x: mpf, x0: str, a: str, b: str, c: str) -> mpf:
    a_v, scale, log_c, k = _gompertz_constants(x0, a, b, c)
    growth = mp.exp(log_c * x)
    return (a_v + scale * growth) * mp.exp(-a_v * x - k * (growth - 1))


def _gompertz_taylor(n: int, x0: str, a: str, b: str, c: str) -> List[mpf]:
    a_v, _, log_c, k = _gompertz_constants(x0, a, b, c)
    # Survival S = exp(u), u = -a x - k (c^x - 1); f = -S'.
    du = [None, -a_v - k * log_c] + [-k * log_c**j for j in range(2, n + 2)]
    derivs = [mpf(1)]
    for order in range(n):
        acc = mpf(0)
        for j in range(order + 1):
            acc += mp.binomial(order, j) * du[j + 1] * derivs[order - j]
        derivs.append(acc)
    return [-derivs[j + 1] for j in range(n)]


def gompertz_makeham(x0: str = "65", a: str = "0.0007", b: str = "0.00005", c: str = "10^0.04") -> TargetSpec:
    for name, value in (("a", a), ("b", b)):
        if _param(value) < 0:
            raise ValueError(f"{name} must be non-negative")
    if _param(c) <= 1:
        raise ValueError("c must exceed 1")
    kwargs = {"x0": x0, "a": a, "b": b, "c": c}
    f = partial(_gompertz_f, **kwargs)
    return TargetSpec(
        name="gompertz_makeham",
        eval_f=f,
        taylor=partial(_gompertz_taylor, **kwargs),
        laplace=LaplaceEvaluator.numeric(f),
        x_max=60.0,
        params=tuple(kwargs.items()),
    )


# -----------------------------------------------------------------------------
# Lognormal, approximated through its survival function
# -----------------------------------------------------------------------------

def _lognormal_g(x: mpf, sigma: str) -> mpf:
    if x <= 0:
        return mpf(0)
    s = _param(sigma)
    return mp.exp(-mp.log(x) ** 2 / (2 * s * s)) / (x * s * mp.sqrt(2 * mp.pi))


def _lognormal_survival(x: mpf, sigma: str) -> mpf:
    if x <= 0:
        return mpf(1)
    s = _param(sigma)
    return mp.erfc(mp.log(x) / (s * mp.sqrt(2))) / 2


def _shifted(t: mpf, func: Callable[[mpf], mpf], x: mpf) -> mpf:
    return func(x + t)


def survival_by_quadrature(x: Number, sigma: str = "1") -> mpf:
    """``int_x^inf g`` by quadrature of the shifted density."""
    g = partial(_lognormal_g, sigma=sigma)
    value = auto_quadrature(partial(_shifted, func=g, x=mpf(x)), 0, current_context().digits)
    return value.real


def _lognormal_laplace(z: mpc, sigma: str) -> mpc:
    if z == 0:
        s = _param(sigma)
        return mpc(mp.exp(s * s / 2))
    g = partial(_lognormal_g, sigma=sigma)
    return (1 - auto_quadrature(g, z, current_context().digits)) / z


def _lognormal_taylor(n: int) -> List[mpf]:
    return [mpf(1)] + [mpf(0)] * (n - 1)


def lognormal_survival(sigma: str = "1") -> TargetSpec:
    if _param(sigma) <= 0:
        raise ValueError("sigma must be positive")
    return TargetSpec(
        name="lognormal_survival",
        eval_f=partial(_lognormal_survival, sigma=sigma),
        taylor=_lognormal_taylor,
        laplace=LaplaceEvaluator.closed_form(partial(_lognormal_laplace, sigma=sigma)),
        post_transform=PostTransform.NEGATE_DERIVATIVE,
        eval_g=partial(_lognormal_g, sigma=sigma),
        x_max=100.0,
        params=(("sigma", sigma),),
    )


# -----------------------------------------------------------------------------
# Hockey stick and unit step
# -----------------------------------------------------------------------------

SMALL_Z = mpf(1) / 2


def _small_z_series(z: mpc, offset: int) -> mpc:
    """``sum_k (-z)^k / (k + offset)!`` until terms drop below precision."""
    floor = mpf(10) ** (-mp.dps - 5)
    total = mpc(0)
    term = 1 / mp.factorial(offset)
    k = 0
    while True:
        total += term
        if abs(term) <= floor * abs(total):
            return total
        k += 1
        term = term * (-z) / (k + offset)


def _hockey_f(x: mpf) -> mpf:
    return max(1 - x, mpf(0))


def _hockey_laplace(z: mpc) -> mpc:
    if abs(z) < SMALL_Z:
        return _small_z_series(z, 2)
    return (mp.exp(-z) + z - 1) / z**2


def _hockey_taylor(n: int) -> List[mpf]:
    return ([mpf(1), mpf(-1)] + [mpf(0)] * n)[:n]


def _step_f(x: mpf) -> mpf:
    return mpf(1) if x <= 1 else mpf(0)


def _step_laplace(z: mpc) -> mpc:
    if abs(z) < SMALL_Z:
        return _small_z_series(z, 1)
    return (1 - mp.exp(-z)) / z


def _step_taylor(n: int) -> List[mpf]:
    return [mpf(1)] + [mpf(0)] * (n - 1)


def hockey_stick() -> TargetSpec:
    return TargetSpec(
        name="hockey_stick",
        eval_f=_hockey_f,
        taylor=_hockey_taylor,
        laplace=LaplaceEvaluator.closed_form(_hockey_laplace),
        x_max=4.0,
    )


def unit_step() -> TargetSpec:
    return TargetSpec(
        name="unit_step",
        eval_f=_step_f,
        taylor=_step_taylor,
        laplace=LaplaceEvaluator.closed_form(_step_laplace),
        x_max=4.0,
    )


def unit_step_via_hockey() -> TargetSpec:
    """Unit step obtained as the negated derivative of the hockey-stick sum."""
    return TargetSpec(
        name="unit_step_via_hockey",
        eval_f=_hockey_f,
        taylor=_hockey_taylor,
        laplace=LaplaceEvaluator.closed_form(_hockey_laplace),
        post_transform=PostTransform.NEGATE_DERIVATIVE,
        eval_g=_step_f,
        x_max=4.0,
    )


# -----------------------------------------------------------------------------
# Registry
# -----------------------------------------------------------------------------

TARGETS: Dict[str, Callable[..., TargetSpec]] = {
    "gaussian": gaussian,
    "gamma_kernel": gamma_kernel,
    "gompertz_makeham": gompertz_makeham,
    "lognormal_survival": lognormal_survival,
    "hockey_stick": hockey_stick,
    "unit_step": unit_step,
    "unit_step_via_hockey": unit_step_via_hockey,
}

TARGET_PARAMS: Dict[str, Dict[str, str]] = {
    "gompertz_makeham": GOMPERTZ_DEFAULTS,
    "lognormal_survival": {"sigma": "1"},
}


def get_target(name: str, params: Optional[Dict[str, str]] = None) -> TargetSpec:
    """
    Build a registered target.

    Raises:
        UnknownTarget: ``name`` is not registered.
        ValueError: an unknown or invalid parameter.
    """
    factory = TARGETS.get(name)
    if factory is None:
        raise UnknownTarget(f"unknown target '{name}' (choose from {', '.join(sorted(TARGETS))})")
    params = dict(params or {})
    allowed = TARGET_PARAMS.get(name, {})
    unknown = set(params) - set(allowed)
    if unknown:
        raise ValueError(f"target '{name}' has no parameter(s) {', '.join(sorted(unknown))}")
    return factory(**params)
