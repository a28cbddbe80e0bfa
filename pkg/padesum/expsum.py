"""
Exponential Sums
================

The approximation pipeline and everything built on its output:

- ``approximate``: target -> points -> Laplace values -> Pade -> sum -> report
- ``error_metrics``: L1 / Linf error of a sum against its target
- ``sweep``: grid search over the segment parameters ``A`` and ``B``
- ``cdf_from_laplace``: distribution functions from a unit-step sum
- JSON coefficient files
"""

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from functools import partial
from pathlib import Path
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import mpmath
from mpmath import mp, mpc, mpf
from pydantic import ValidationError

from .errors import (
    AllFailed,
    CoefficientFileError,
    ImaginaryLeak,
    NonConvergent,
    PadesumError,
    PipelineError,
    UnstableTail,
)
from .laplace import auto_quadrature, eval_many
from .padecf import PadeProblem, build_points, interpolation_residual, solve
from .polyrat import (
    PrecisionContext,
    RationalFunction,
    current_context,
    format_mpf,
    partial_fractions,
    with_precision,
)
from .schema import ApproxConfig, ConfigModel, ExpSumFile, RunManifest, TermModel
from .targets import PostTransform, TargetSpec, taylor_coeffs

logger = logging.getLogger(__name__)

DEFAULT_N_GRID = 2000
METRICS_DIGITS = 50
GOLDEN_REL_WIDTH = 1e-6
LOG_X_MIN = 1e-8
REFINE_CANDIDATES = 8

__all__ = [
    "ApproxConfig",
    "ExpSum",
    "ErrorReport",
    "Objective",
    "SweepResult",
    "approximate",
    "cdf_from_laplace",
    "derivative_expsum",
    "error_metrics",
    "eval_expsum",
    "exponential_laplace",
    "from_rational",
    "gamma_laplace",
    "load_expsum",
    "save_expsum",
    "sweep",
]


# -----------------------------------------------------------------------------
# Types
# -----------------------------------------------------------------------------

@dataclass(frozen=True)
class ExpSum:
    """``phi(x) = sum_j c_j exp(-lambda_j x)``, stored as ``(c_j, lambda_j)`` pairs."""

    terms: Tuple[Tuple[mpc, mpc], ...]
    digits: int = 100
    config: Optional[ApproxConfig] = None
    transform: str = PostTransform.IDENTITY.value
    target: Optional[str] = None

    @property
    def M(self) -> int:
        return len(self.terms)

    @property
    def coefficients(self) -> List[mpc]:
        return [c for c, _ in self.terms]

    @property
    def exponents(self) -> List[mpc]:
        return [lam for _, lam in self.terms]

    def __call__(self, x) -> mpf:
        return eval_expsum(self, x)


@dataclass
class ErrorReport:
    """Error of a sum against its target on ``[0, x_max]``."""

    l1: mpf
    linf: mpf
    linf_location: mpf
    max_abs_c: mpf
    min_re_lambda: mpf
    interp_residual: mpf = field(default_factory=lambda: mpf(0))
    grid: List[Tuple[mpf, mpf]] = field(default_factory=list, repr=False)
    warnings: List[str] = field(default_factory=list)

    def summary(self) -> str:
        return (
            f"L1={mpmath.nstr(self.l1, 4)} "
            f"Linf={mpmath.nstr(self.linf, 4)} "
            f"maxc={mpmath.nstr(self.max_abs_c, 4)}"
        )


# -----------------------------------------------------------------------------
# Conversions
# -----------------------------------------------------------------------------

def _term_key(term: Tuple[mpc, mpc]) -> Tuple[float, float]:
    lam = term[1]
    return float(lam.real), float(lam.imag)


def _symmetrize(terms: Sequence[Tuple[mpc, mpc]], digits: int) -> List[Tuple[mpc, mpc]]:
    """Pair conjugate terms exactly; zero the imaginary part of real terms."""
    tol = mpf(10) ** (-mpf(digits) / 2)
    remaining = list(terms)
    out: List[Tuple[mpc, mpc]] = []
    while remaining:
        c, lam = remaining.pop(0)
        scale = 1 + abs(lam)
        if abs(lam.imag) <= tol * scale:
            out.append((mpc(c.real, 0), mpc(lam.real, 0)))
            continue
        best = None
        for k, (_, other) in enumerate(remaining):
            gap = abs(other - lam.conjugate())
            if best is None or gap < best[0]:
                best = (gap, k)
        if best is None or best[0] > tol * scale:
            logger.warning("No conjugate partner for exponent %s", mpmath.nstr(lam, 10))
            out.append((c, lam))
            continue
        c2, lam2 = remaining.pop(best[1])
        c_avg = (c + c2.conjugate()) / 2
        lam_avg = (lam + lam2.conjugate()) / 2
        out.append((c_avg, lam_avg))
        out.append((c_avg.conjugate(), lam_avg.conjugate()))
    return sorted(out, key=_term_key)


@with_precision
def from_rational(r: RationalFunction) -> ExpSum:
    """Sum whose Laplace transform is ``r``: ``lambda = -pole``, ``c = residue``."""
    ctx = current_context()
    pairs = partial_fractions(r)
    terms = _symmetrize([(res, -pole) for res, pole in pairs], ctx.digits)
    return ExpSum(terms=tuple(terms), digits=ctx.digits)


def _leak_check(total: mpc, scale: mpf) -> mpf:
    tol = mpf(10) ** (-mpf(current_context().digits) / 2)
    if abs(total.imag) > tol * scale:
        raise ImaginaryLeak(
            f"imaginary part {mpmath.nstr(total.imag, 5)} exceeds tolerance "
            f"(sum |c| = {mpmath.nstr(scale, 5)})"
        )
    return total.real


@with_precision
def eval_expsum(s: ExpSum, x) -> mpf:
    x = mpf(x)
    if x < 0:
        raise ValueError("exponential sums are evaluated for x >= 0")
    total = mpc(0)
    scale = mpf(0)
    for c, lam in s.terms:
        total += c * mp.exp(-lam * x)
        scale += abs(c)
    return _leak_check(total, scale)


def derivative_expsum(s: ExpSum) -> ExpSum:
    """Terms ``(c lambda, lambda)``: the sum representing ``-phi'``."""
    return replace(
        s,
        terms=tuple((c * lam, lam) for c, lam in s.terms),
        transform=PostTransform.NEGATE_DERIVATIVE.value,
    )


# -----------------------------------------------------------------------------
# Pipeline
# -----------------------------------------------------------------------------

@contextmanager
def _step(name: str) -> Iterator[None]:
    try:
        yield
    except PipelineError:
        raise
    except (PadesumError, ArithmeticError, ValueError) as exc:
        logger.debug("pipeline step %s failed: %s", name, exc)
        raise PipelineError(name, exc) from exc


def _laplace_values(t: TargetSpec, points: Sequence[mpc], jobs: int, use_symmetry: bool) -> List[mpc]:
    p = len(points)
    if not use_symmetry:
        return eval_many(t.laplace, points, jobs=jobs)
    half = (p + 1) // 2
    lower = eval_many(t.laplace, points[:half], jobs=jobs)
    values = list(lower) + [None] * (p - half)
    for j in range(half, p):
        values[j] = lower[p - 1 - j].conjugate()
    if p % 2:
        mid = p // 2
        values[mid] = mpc(values[mid].real, 0)
    return values


def approximate(
    t: TargetSpec,
    cfg: ApproxConfig,
    jobs: int = 1,
    x_max: Optional[float] = None,
    n_grid: int = DEFAULT_N_GRID,
    metrics_digits: int = METRICS_DIGITS,
    use_symmetry: bool = True,
    log_x_min: float = LOG_X_MIN,
) -> Tuple[ExpSum, ErrorReport]:
    """
    Run the full pipeline for one configuration.

    Args:
        t: Target to approximate.
        cfg: Term count, coefficients at infinity and segment parameters.
        jobs: Worker processes for the Laplace evaluations.
        x_max: Error-grid truncation (target default when omitted).
        n_grid: Error-grid size.
        metrics_digits: Precision used for the error report.
        use_symmetry: Evaluate the transform on the lower half only.

    Returns:
        The exponential sum for the user-facing function and its error report.

    Raises:
        PipelineError: with ``step`` naming the stage that failed.
    """
    with PrecisionContext(cfg.digits):
        with _step("points"):
            points = build_points(cfg.p, cfg.A, cfg.B)
        with _step("taylor"):
            xi = taylor_coeffs(t, cfg.n_inf)
            if xi[0] == 0:
                raise ValueError("xi_0 must be nonzero")
        with _step("laplace"):
            values = _laplace_values(t, points, jobs, use_symmetry)
        with _step("problem"):
            problem = PadeProblem.build(points, values, xi)
        with _step("pade"):
            r = solve(problem)
            residual = interpolation_residual(problem, r)
        with _step("poles"):
            s = from_rational(r)
        s = replace(s, config=cfg, target=t.name)
        if t.post_transform is PostTransform.NEGATE_DERIVATIVE:
            s = derivative_expsum(s)
        logger.info("approximate %s %s: %d terms", t.name, cfg.label(), s.M)

    with _step("metrics"):
        report = error_metrics(
            t,
            s,
            x_max if x_max is not None else t.x_max,
            n_grid,
            interp_residual=residual,
            digits=metrics_digits,
            log_x_min=log_x_min,
        )
    logger.info("approximate %s %s: %s", t.name, cfg.label(), report.summary())
    return s, report


# -----------------------------------------------------------------------------
# Error metrics
# -----------------------------------------------------------------------------

def golden_section_max(func: Callable[[mpf], mpf], a: mpf, b: mpf, rel_width: float) -> Tuple[mpf, mpf]:
    """Maximize ``func`` on ``[a, b]`` by golden-section search."""
    ratio = (mp.sqrt(5) - 1) / 2
    width = (b - a) * mpf(rel_width)
    c = b - ratio * (b - a)
    d = a + ratio * (b - a)
    fc, fd = func(c), func(d)
    while b - a > width:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - ratio * (b - a)
            fc = func(c)
        else:
            a, c, fc = c, d, fd
            d = a + ratio * (b - a)
            fd = func(d)
    return (c, fc) if fc > fd else (d, fd)


def _adaptive_simpson(
    func: Callable[[mpf], mpf], a: mpf, b: mpf, fa: mpf, fb: mpf, tol: mpf, depth: int = 20
) -> mpf:
    m = (a + b) / 2
    fm = func(m)
    whole = (b - a) * (fa + 4 * fm + fb) / 6
    stack = [(a, b, fa, fm, fb, whole, tol, depth)]
    total = mpf(0)
    while stack:
        a, b, fa, fm, fb, whole, tol, depth = stack.pop()
        m = (a + b) / 2
        lm, rm = (a + m) / 2, (m + b) / 2
        flm, frm = func(lm), func(rm)
        left = (m - a) * (fa + 4 * flm + fm) / 6
        right = (b - m) * (fm + 4 * frm + fb) / 6
        if depth <= 0 or abs(left + right - whole) <= 15 * tol:
            total += left + right + (left + right - whole) / 15
        else:
            stack.append((a, m, fa, flm, fm, left, tol / 2, depth - 1))
            stack.append((m, b, fm, frm, fb, right, tol / 2, depth - 1))
    return total


def _abs_shifted(t: mpf, func: Callable[[mpf], mpf], x0: mpf) -> mpf:
    return abs(func(x0 + t))


def error_metrics(
    t: TargetSpec,
    s: ExpSum,
    x_max: float,
    n_grid: int = DEFAULT_N_GRID,
    interp_residual=0,
    digits: int = METRICS_DIGITS,
    log_x_min: float = LOG_X_MIN,
    golden_rel_width: float = GOLDEN_REL_WIDTH,
    strict: bool = False,
) -> ErrorReport:
    """
    Measure ``e(x) = f(x) - phi(x)`` against the user-facing target.

    ``Linf`` is the grid maximum refined by golden-section search around the
    largest local maxima; ``L1`` is adaptive Simpson on every grid cell plus
    bounds for both tails beyond ``x_max``.

    Raises:
        ValueError: ``x_max <= 0`` or ``n_grid < 100``.
        UnstableTail: only with ``strict=True``, when some ``Re lambda <= 0``.
    """
    if x_max <= 0:
        raise ValueError("x_max must be positive")
    if n_grid < 100:
        raise ValueError("n_grid must be >= 100")

    with PrecisionContext(digits):
        f = t.user_function
        x_end = mpf(x_max)
        warnings: List[str] = []

        min_re = min((lam.real for lam in s.exponents), default=mp.inf)
        if min_re <= 0:
            message = f"exponent with non-positive real part {mpmath.nstr(min_re, 6)}"
            if strict:
                raise UnstableTail(message)
            logger.warning("%s: %s", t.name, message)
            warnings.append(message)

        def err(x: mpf) -> mpf:
            return f(x) - eval_expsum(s, x)

        xs = {x_end * i / n_grid for i in range(n_grid + 1)}
        if t.post_transform is PostTransform.NEGATE_DERIVATIVE:
            lo, hi = mp.log(mpf(log_x_min)), mp.log(x_end)
            xs.update(mp.exp(lo + (hi - lo) * i / (n_grid - 1)) for i in range(n_grid))
        xs_sorted = sorted(xs)
        values = [err(x) for x in xs_sorted]
        grid = list(zip(xs_sorted, values))
        mags = [abs(v) for v in values]

        best_i = max(range(len(mags)), key=mags.__getitem__)
        linf, linf_at = mags[best_i], xs_sorted[best_i]
        peaks = [
            i
            for i in range(len(mags))
            if (i == 0 or mags[i] >= mags[i - 1]) and (i == len(mags) - 1 or mags[i] >= mags[i + 1])
        ]
        peaks.sort(key=mags.__getitem__, reverse=True)
        for i in peaks[:REFINE_CANDIDATES]:
            a = xs_sorted[max(i - 1, 0)]
            b = xs_sorted[min(i + 1, len(xs_sorted) - 1)]
            if b <= a:
                continue
            x_ref, v_ref = golden_section_max(lambda x: abs(err(x)), a, b, golden_rel_width)
            if v_ref > linf:
                linf, linf_at = v_ref, x_ref

        tol = max(linf, mpf(10) ** (-digits)) * mpf(10) ** -8 / n_grid
        l1 = mpf(0)
        for (a, ea), (b, eb) in zip(grid[:-1], grid[1:]):
            l1 += _adaptive_simpson(lambda x: abs(err(x)), a, b, abs(ea), abs(eb), tol)

        for c, lam in s.terms:
            if lam.real > 0:
                l1 += abs(c) * mp.exp(-lam.real * x_end) / lam.real
        try:
            tail = auto_quadrature(partial(_abs_shifted, func=f, x0=x_end), 0, 20)
            l1 += abs(tail)
        except NonConvergent as exc:
            warnings.append(f"tail quadrature of |f| failed: {exc}")

        return ErrorReport(
            l1=l1,
            linf=linf,
            linf_location=linf_at,
            max_abs_c=max((abs(c) for c in s.coefficients), default=mpf(0)),
            min_re_lambda=min_re,
            interp_residual=mpf(interp_residual),
            grid=grid,
            warnings=warnings,
        )


# -----------------------------------------------------------------------------
# Sweep
# -----------------------------------------------------------------------------

@dataclass(frozen=True)
class Objective:
    """``l1``, ``linf`` or ``maxc`` (min L1 subject to ``max|c| < bound``)."""

    kind: str = "l1"
    bound: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("l1", "linf", "maxc"):
            raise ValueError(f"unknown objective '{self.kind}'")
        if self.kind == "maxc" and (self.bound is None or self.bound <= 0):
            raise ValueError("maxc objective needs a positive bound")

    @classmethod
    def parse(cls, text: str) -> "Objective":
        kind, _, bound = text.strip().lower().partition(":")
        return cls(kind, float(bound) if bound else None)

    def admits(self, report: ErrorReport) -> bool:
        return self.kind != "maxc" or report.max_abs_c < self.bound

    def score(self, report: ErrorReport) -> mpf:
        return report.linf if self.kind == "linf" else report.l1


@dataclass
class SweepRow:
    A: str
    B: str
    status: str
    l1: Optional[mpf] = None
    linf: Optional[mpf] = None
    max_abs_c: Optional[mpf] = None


@dataclass
class SweepResult:
    config: ApproxConfig
    report: ErrorReport
    expsum: ExpSum
    rows: List[SweepRow]


def _sweep_task(
    task: Tuple[TargetSpec, int, int, str, str, int, Dict]
) -> Tuple[str, str, Optional[ApproxConfig], Optional[ExpSum], Optional[ErrorReport], str]:
    t, M, n_inf, A, B, digits, options = task
    try:
        cfg = ApproxConfig(M=M, n_inf=n_inf, A=A, B=B, digits=digits)
    except ValidationError as exc:
        reason = "; ".join(err["msg"] for err in exc.errors())
        logger.info("sweep A=%s B=%s: invalid (%s)", A, B, reason)
        return A, B, None, None, None, f"invalid: {reason}"
    try:
        s, report = approximate(t, cfg, jobs=1, **options)
        return A, B, cfg, s, report, "ok"
    except PipelineError as exc:
        logger.info("sweep %s: %s", cfg.label(), exc)
        return A, B, cfg, None, None, f"failed at {exc.step}"


def sweep(
    t: TargetSpec,
    M: int,
    n_inf: int,
    A_grid: Sequence[Union[str, float]],
    B_grid: Sequence[Union[str, float]],
    objective: Union[Objective, str] = "l1",
    digits: int = 100,
    jobs: int = 1,
    **options,
) -> SweepResult:
    """
    Run ``approximate`` on every ``(A, B)`` and keep the best admissible run.

    Raises:
        ValueError: an empty grid.
        AllFailed: no grid point succeeded and satisfied the objective.
    """
    if not A_grid or not B_grid:
        raise ValueError("A and B grids must be non-empty")
    if isinstance(objective, str):
        objective = Objective.parse(objective)

    tasks = [
        (t, M, n_inf, str(a).strip(), str(b).strip(), digits, options)
        for a in A_grid
        for b in B_grid
    ]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_sweep_task, tasks))
    else:
        outcomes = [_sweep_task(task) for task in tasks]

    rows: List[SweepRow] = []
    best = None
    for A, B, cfg, s, report, status in outcomes:
        if report is None:
            rows.append(SweepRow(A, B, status))
            continue
        if not objective.admits(report):
            status = f"rejected: max|c|={mpmath.nstr(report.max_abs_c, 4)}"
        rows.append(SweepRow(cfg.A, cfg.B, status, report.l1, report.linf, report.max_abs_c))
        if status != "ok":
            continue
        if best is None or objective.score(report) < objective.score(best[1]):
            best = (cfg, report, s)

    if best is None:
        raise AllFailed(f"no admissible configuration among {len(tasks)} grid points")
    cfg, report, s = best
    logger.info("sweep %s: best %s %s", t.name, cfg.label(), report.summary())
    return SweepResult(config=cfg, report=report, expsum=s, rows=rows)


# -----------------------------------------------------------------------------
# Distribution functions
# -----------------------------------------------------------------------------

def _exponential_law(z: mpc, rate: str) -> mpc:
    r = mpf(rate)
    return r / (r + z)


def _gamma_law(z: mpc, shape: str, rate: str) -> mpc:
    r = mpf(rate)
    return (r / (r + z)) ** mpf(shape)


def exponential_laplace(rate: Union[str, float] = "1") -> Callable[[mpc], mpc]:
    """Laplace transform ``rate / (rate + z)`` of an exponential law."""
    if mpf(rate) <= 0:
        raise ValueError("rate must be positive")
    return partial(_exponential_law, rate=str(rate))


def gamma_laplace(shape: Union[str, float], rate: Union[str, float] = "1") -> Callable[[mpc], mpc]:
    """Laplace transform ``(rate / (rate + z))**shape`` of a gamma law."""
    if mpf(shape) <= 0 or mpf(rate) <= 0:
        raise ValueError("shape and rate must be positive")
    return partial(_gamma_law, shape=str(shape), rate=str(rate))


@with_precision
def cdf_from_laplace(
    s: ExpSum,
    laplace_x: Callable[[mpc], mpc],
    u,
    diagnostics: Optional[Dict[str, mpf]] = None,
) -> mpf:
    """
    ``P(X <= u) ~ sum_j c_j F_X(lambda_j / u)`` for a unit-step sum ``s``.

    The result is clamped to ``[0, 1]``; the raw value goes to
    ``diagnostics["raw"]`` when a dict is passed.
    """
    u = mpf(u)
    if u <= 0:
        raise ValueError("u must be positive")
    total = mpc(0)
    scale = mpf(0)
    for c, lam in s.terms:
        total += c * laplace_x(lam / u)
        scale += abs(c)
    raw = _leak_check(total, scale)
    value = min(max(raw, mpf(0)), mpf(1))
    if value != raw:
        logger.warning("cdf_from_laplace clamped %s", mpmath.nstr(raw, 10))
    if diagnostics is not None:
        diagnostics["raw"] = raw
    return value


# -----------------------------------------------------------------------------
# Coefficient files
# -----------------------------------------------------------------------------

def expsum_to_model(s: ExpSum, manifest: Optional[RunManifest] = None) -> ExpSumFile:
    config = None
    if s.config is not None:
        config = ConfigModel(M=s.config.M, n_inf=s.config.n_inf, A=s.config.A, B=s.config.B)
    with PrecisionContext(s.digits):
        terms = [
            TermModel(
                c_re=format_mpf(c.real),
                c_im=format_mpf(c.imag),
                l_re=format_mpf(lam.real),
                l_im=format_mpf(lam.imag),
            )
            for c, lam in s.terms
        ]
    return ExpSumFile(
        M=s.M,
        digits=s.digits,
        config=config,
        transform=s.transform,
        target=s.target,
        terms=terms,
        manifest=manifest,
    )


def expsum_from_model(model: ExpSumFile) -> ExpSum:
    config = None
    if model.config is not None:
        config = ApproxConfig(**model.config.model_dump(), digits=model.digits)
    with PrecisionContext(model.digits):
        terms = tuple(
            (mpc(mpf(t.c_re), mpf(t.c_im)), mpc(mpf(t.l_re), mpf(t.l_im))) for t in model.terms
        )
    return ExpSum(
        terms=terms,
        digits=model.digits,
        config=config,
        transform=model.transform,
        target=model.target,
    )


def save_expsum(s: ExpSum, path: Union[str, Path], manifest: Optional[RunManifest] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(expsum_to_model(s, manifest).model_dump_json(indent=2, exclude_none=True))
    logger.debug("wrote %d terms to %s", s.M, path)
    return path


def load_expsum(path: Union[str, Path]) -> ExpSum:
    """
    Read a coefficient file.

    Raises:
        CoefficientFileError: missing, unreadable or malformed file.
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text())
        return expsum_from_model(ExpSumFile.model_validate(data))
    except FileNotFoundError as exc:
        raise CoefficientFileError(f"coefficient file not found: {path}") from exc
    except (OSError, json.JSONDecodeError, ValidationError, ValueError) as exc:
        raise CoefficientFileError(f"malformed coefficient file {path}: {exc}") from exc
