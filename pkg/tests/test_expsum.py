"""
Tests for padesum.expsum: conversion, evaluation, the pipeline, sweeps,
distribution functions and coefficient files.

Run with:
    pytest tests/test_expsum.py -v
"""

import json
import sys
from functools import partial
from pathlib import Path

import pytest
from mpmath import mp, mpc, mpf
from pydantic import ValidationError

PROJECT_ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(PROJECT_ROOT))

from padesum.errors import (  # noqa: E402
    AllFailed,
    CoefficientFileError,
    ImaginaryLeak,
    MultiplePole,
    PipelineError,
    UnstableTail,
)
from padesum.expsum import (  # noqa: E402
    ApproxConfig,
    ExpSum,
    Objective,
    approximate,
    cdf_from_laplace,
    derivative_expsum,
    error_metrics,
    eval_expsum,
    exponential_laplace,
    from_rational,
    gamma_laplace,
    load_expsum,
    save_expsum,
    sweep,
)
from padesum.laplace import LaplaceEvaluator  # noqa: E402
from padesum.polyrat import Polynomial, PrecisionContext, RationalFunction  # noqa: E402
from padesum.schema import RunManifest  # noqa: E402
from padesum.targets import TargetSpec, get_target  # noqa: E402

FAST = {"n_grid": 200, "metrics_digits": 32}


def decay_target(eval_f=None, taylor=None):
    """exp(-x) with its closed-form transform."""
    return TargetSpec(
        name="decay",
        eval_f=eval_f or (lambda x: mp.exp(-x)),
        taylor=taylor or (lambda n: [(-1) ** j for j in range(n)]),
        laplace=LaplaceEvaluator.closed_form(lambda z: 1 / (z + 1)),
        x_max=30.0,
    )


def two_decays_target(laplace_limit=None):
    """exp(-x) + exp(-3x); the transform fails for |Im z| above ``laplace_limit``."""

    def laplace(z):
        if laplace_limit is not None and abs(z.imag) > laplace_limit:
            raise ValueError("outside the tabulated range")
        return 1 / (z + 1) + 1 / (z + 3)

    return TargetSpec(
        name="two_decays",
        eval_f=lambda x: mp.exp(-x) + mp.exp(-3 * x),
        taylor=lambda n: [(-1) ** j + (-3) ** j for j in range(n)],
        laplace=LaplaceEvaluator.closed_form(laplace),
        x_max=20.0,
    )


def error_at(t, s, x, digits=60):
    """f(x) - phi(x) at ``digits`` digits."""
    with PrecisionContext(digits):
        return t.user_function(mpf(x)) - eval_expsum(s, mpf(x))


# =============================================================================
# Fixtures
# =============================================================================

@pytest.fixture(scope="module")
def hockey_run():
    """Five-term hockey-stick approximation at 40 digits."""
    cfg = ApproxConfig(M=5, n_inf=2, A="0.5", B="8.5", digits=40)
    return approximate(get_target("hockey_stick"), cfg, **FAST)


@pytest.fixture(scope="module")
def gaussian_runs():
    """Twelve-term Gaussian sums matching two and four coefficients at infinity."""
    runs = {}
    for n_inf in (2, 4):
        cfg = ApproxConfig(M=12, n_inf=n_inf, A="3.5", B="10.5", digits=60)
        runs[n_inf] = approximate(get_target("gaussian"), cfg, **FAST)
    return runs


# =============================================================================
# Conversion and evaluation
# =============================================================================

class TestFromRational:
    """Partial fractions to exponential sums."""

    def test_worked_example(self, ctx100):
        """(z + 1)/(z^2 - z + 1) has lambda = -(1 +/- i sqrt3)/2."""
        r = RationalFunction(Polynomial((1, 1)), Polynomial((1, -1, 1)))
        s = from_rational(r)
        half_sqrt3 = mp.sqrt(3) / 2
        tol = mpf(10) ** -85
        (c1, l1), (c2, l2) = s.terms
        assert abs(l1 - mpc(-0.5, -half_sqrt3)) < tol
        assert abs(c1 - mpc(0.5, -half_sqrt3)) < tol
        assert l2 == l1.conjugate()
        assert c2 == c1.conjugate()

    def test_double_pole(self, ctx40):
        """A repeated pole has no exponential-sum form here."""
        with pytest.raises(MultiplePole):
            from_rational(RationalFunction(Polynomial((1,)), Polynomial((1, 2, 1))))


class TestEvalExpSum:
    """Point evaluation of a sum."""

    def test_single_term(self, ctx40):
        """1 * exp(-x) at 0 and 1."""
        s = ExpSum(terms=((mpc(1), mpc(1)),), digits=40)
        assert eval_expsum(s, 0) == 1
        assert abs(s(1) - mp.exp(-1)) < mpf(10) ** -38

    def test_conjugate_pair(self, ctx40):
        """i e^(-(1+i)x) - i e^(-(1-i)x) = 2 e^(-x) sin x."""
        s = ExpSum(terms=((mpc(0, 1), mpc(1, 1)), (mpc(0, -1), mpc(1, -1))), digits=40)
        x = mpf(1)
        assert abs(eval_expsum(s, x) - 2 * mp.exp(-x) * mp.sin(x)) < mpf(10) ** -38

    def test_imaginary_leak(self, ctx40):
        """A term without its conjugate leaves an imaginary part."""
        s = ExpSum(terms=((mpc(0, 1), mpc(1)),), digits=40)
        with pytest.raises(ImaginaryLeak):
            eval_expsum(s, 0)

    def test_negative_x(self, ctx40):
        """Sums are evaluated for x >= 0."""
        s = ExpSum(terms=((mpc(1), mpc(1)),), digits=40)
        with pytest.raises(ValueError):
            eval_expsum(s, -1)

    def test_derivative(self, ctx40):
        """-d/dx of 2 exp(-3x) is 6 exp(-3x)."""
        s = derivative_expsum(ExpSum(terms=((mpc(2), mpc(3)),), digits=40))
        assert s.terms == ((mpc(6), mpc(3)),)
        assert s.transform == "negate_derivative"


# =============================================================================
# Pipeline
# =============================================================================

class TestApproximate:
    """Target to exponential sum."""

    def test_config_validation(self):
        """p = 2M - n_inf must be at least 2."""
        with pytest.raises(ValidationError):
            ApproxConfig(M=1, n_inf=1, A="1", B="1")
        with pytest.raises(ValidationError):
            ApproxConfig(M=3, n_inf=2, A="1", B="0")

    def test_hockey_shape(self, hockey_run):
        """Five conjugate-closed terms with a bounded error."""
        s, report = hockey_run
        assert s.M == 5
        assert s.target == "hockey_stick"
        assert s.config.label() == "M=5 n_inf=2 A=0.5 B=8.5"
        exponents = s.exponents
        for lam in exponents:
            assert lam.conjugate() in exponents
        assert 0 < report.linf < 1
        assert 0 < report.l1 < 1
        assert report.max_abs_c > 0

    def test_moments_at_infinity(self, hockey_run):
        """sum c = f(0) = 1 and sum c lambda = -f'(0) = 1."""
        s, _ = hockey_run
        with mp.workdps(50):
            assert abs(sum(s.coefficients) - 1) < mpf(10) ** -15
            assert abs(sum(c * lam for c, lam in s.terms) - 1) < mpf(10) ** -15

    def test_deterministic(self, hockey_run):
        """Repeating a run reproduces the coefficients bit for bit."""
        s, _ = hockey_run
        cfg = ApproxConfig(M=5, n_inf=2, A="0.5", B="8.5", digits=40)
        again, _ = approximate(get_target("hockey_stick"), cfg, **FAST)
        assert again.terms == s.terms

    def test_failing_step_is_named(self):
        """A zero leading coefficient fails in the taylor step."""
        t = decay_target(taylor=lambda n: [mpf(0)] * n)
        cfg = ApproxConfig(M=2, n_inf=2, A="1", B="2", digits=40)
        with pytest.raises(PipelineError) as excinfo:
            approximate(t, cfg, **FAST)
        assert excinfo.value.step == "taylor"

    def test_exact_recovery(self):
        """A target that is already one exponential comes back unchanged."""
        cfg = ApproxConfig(M=2, n_inf=2, A="1", B="2", digits=40)
        s, report = approximate(two_decays_target(), cfg, **FAST)
        tol = mpf(10) ** -15
        (c1, l1), (c2, l2) = s.terms
        assert abs(l1 - 1) < tol and abs(l2 - 3) < tol
        assert abs(c1 - 1) < tol and abs(c2 - 1) < tol
        assert report.linf < mpf(10) ** -15


class TestBehaviourNearZero:
    """Matching n_inf Taylor coefficients makes the error O(x^n_inf) at the origin."""

    @pytest.mark.parametrize("n_inf", [2, 4])
    def test_error_order(self, gaussian_runs, n_inf):
        """|e(x)| / x^n_inf stays bounded for x = 1e-2, 1e-3, 1e-4."""
        s, _ = gaussian_runs[n_inf]
        t = get_target("gaussian")
        ratios = [abs(error_at(t, s, mpf(10) ** -k)) / mpf(10) ** (-k * n_inf) for k in (2, 3, 4)]
        assert ratios[1] <= 5 * ratios[0]
        assert ratios[2] <= 5 * ratios[0]

    def test_hockey_error_order(self, hockey_run):
        """The hockey-stick sum matches f(0) and f'(0)."""
        s, _ = hockey_run
        t = get_target("hockey_stick")
        ratios = [abs(error_at(t, s, mpf(10) ** -k)) / mpf(10) ** (-2 * k) for k in (2, 3, 4)]
        assert ratios[1] <= 5 * ratios[0]
        assert ratios[2] <= 5 * ratios[0]

    def test_more_coefficients_help_near_zero(self, gaussian_runs):
        """Raising n_inf from 2 to 4 lowers max |e(x)| on [0, 0.01]."""
        t = get_target("gaussian")
        xs = [mpf(k) / 2000 for k in range(21)]
        worst = {
            n_inf: max(abs(error_at(t, gaussian_runs[n_inf][0], x)) for x in xs)
            for n_inf in (2, 4)
        }
        assert worst[4] < worst[2]

    def test_first_moment(self, gaussian_runs):
        """sum c equals f(0) = 1."""
        for s, _ in gaussian_runs.values():
            with PrecisionContext(60):
                assert abs(sum(s.coefficients) - 1) < mpf(10) ** -40


class TestErrorCurve:
    """Shape of the Gaussian error on [0, 12]."""

    def test_equioscillation(self, gaussian_runs):
        """The error changes sign repeatedly with peaks of comparable size."""
        _, report = gaussian_runs[2]
        values = [v for _, v in report.grid if abs(v) > report.linf / 1000]
        runs = [[values[0]]]
        for v in values[1:]:
            if (v > 0) == (runs[-1][-1] > 0):
                runs[-1].append(v)
            else:
                runs.append([v])
        peaks = [max(abs(v) for v in run) for run in runs]
        assert len(runs) >= 8
        assert sum(1 for peak in peaks if peak >= report.linf / 10) >= 5


# =============================================================================
# Error metrics
# =============================================================================

class TestErrorMetrics:
    """L1 and Linf of a sum against its target."""

    def test_exact_sum(self):
        """A target equal to its sum has zero Linf; L1 is the two tails."""
        s = ExpSum(terms=((mpc(1), mpc(1)),), digits=40)
        t = decay_target(eval_f=partial(eval_expsum, s))
        report = error_metrics(t, s, 30, 100, digits=40)
        assert report.linf == 0
        assert abs(report.l1 - 2 * mp.exp(-30)) < mpf(10) ** -15 * mp.exp(-30)

    def test_invalid_grid(self):
        """x_max must be positive and the grid at least 100 cells."""
        s = ExpSum(terms=((mpc(1), mpc(1)),), digits=40)
        with pytest.raises(ValueError):
            error_metrics(decay_target(), s, 0, 100)
        with pytest.raises(ValueError):
            error_metrics(decay_target(), s, 10, 50)

    def test_unstable_tail_strict(self):
        """A non-decaying exponent is an error in strict mode."""
        s = ExpSum(terms=((mpc(1), mpc(0)),), digits=40)
        with pytest.raises(UnstableTail):
            error_metrics(decay_target(), s, 5, 100, digits=32, strict=True)

    def test_unstable_tail_warning(self):
        """Outside strict mode a non-decaying exponent is reported."""
        s = ExpSum(terms=((mpc("0.001"), mpc(0)), (mpc(1), mpc(1))), digits=40)
        report = error_metrics(decay_target(), s, 5, 100, digits=32)
        assert report.warnings
        assert report.min_re_lambda == 0
        assert abs(report.linf - mpf("0.001")) < mpf(10) ** -20


# =============================================================================
# Sweep
# =============================================================================

class TestObjective:
    """Sweep objectives."""

    def test_parse(self):
        """'maxc:60' carries its bound."""
        objective = Objective.parse("maxc:60")
        assert (objective.kind, objective.bound) == ("maxc", 60.0)
        assert Objective.parse("L1").kind == "l1"

    def test_invalid(self):
        """Unknown kinds and maxc without a bound are refused."""
        with pytest.raises(ValueError):
            Objective.parse("l2")
        with pytest.raises(ValueError):
            Objective.parse("maxc")


class TestSweep:
    """Grid search over the segment."""

    def test_single_point(self):
        """One grid point is its own winner."""
        result = sweep(get_target("hockey_stick"), 5, 2, ["0.5"], ["8.5"], "l1", digits=40, **FAST)
        assert (result.config.A, result.config.B) == ("0.5", "8.5")
        assert len(result.rows) == 1
        assert result.rows[0].status == "ok"

    def test_nothing_admissible(self):
        """A coefficient bound nothing satisfies leaves no winner."""
        with pytest.raises(AllFailed):
            sweep(get_target("hockey_stick"), 5, 2, ["0.5"], ["8.5"], "maxc:1e-30", digits=40, **FAST)

    def test_empty_grid(self):
        """An empty grid is refused."""
        with pytest.raises(ValueError):
            sweep(get_target("hockey_stick"), 5, 2, [], ["8.5"])

    def test_picks_smallest_error(self):
        """The winner carries the smallest L1 among the successful rows."""
        result = sweep(
            get_target("hockey_stick"), 5, 2, ["0.5"], ["6.5", "8.5"], "l1", digits=40, **FAST
        )
        ok = [row for row in result.rows if row.status == "ok"]
        assert len(ok) == 2
        assert result.report.l1 == min(row.l1 for row in ok)
        winner = [row for row in ok if row.l1 == result.report.l1][0]
        assert (result.config.A, result.config.B) == (winner.A, winner.B)

    def test_failed_run_is_skipped(self):
        """A point whose transform cannot be evaluated is a row, not an abort."""
        t = two_decays_target(laplace_limit=10)
        result = sweep(t, 2, 2, ["1"], ["1", "2", "50"], "l1", digits=40, **FAST)
        statuses = {row.B: row.status for row in result.rows}
        assert statuses == {"1": "ok", "2": "ok", "50": "failed at laplace"}
        assert result.config.B in ("1", "2")

    def test_invalid_point_is_a_row(self):
        """A grid point that fails validation does not stop the others."""
        result = sweep(two_decays_target(), 2, 2, ["1"], ["2", "-1"], "l1", digits=40, **FAST)
        statuses = {row.B: row.status for row in result.rows}
        assert statuses["2"] == "ok"
        assert statuses["-1"].startswith("invalid")
        assert "B must be > 0" in statuses["-1"]
        assert result.config.B == "2"


# =============================================================================
# Distribution functions
# =============================================================================

class TestCdfFromLaplace:
    """P(X <= u) from a unit-step sum."""

    def test_formula(self, ctx40):
        """With phi = exp(-x) and X ~ Exp(1) the sum is u/(u + 1)."""
        s = ExpSum(terms=((mpc(1), mpc(1)),), digits=40)
        value = cdf_from_laplace(s, exponential_laplace(1), 3)
        assert abs(value - mpf("0.75")) < mpf(10) ** -38

    def test_gamma_law(self, ctx40):
        """Gamma(2, 1) transform squared the exponential one."""
        s = ExpSum(terms=((mpc(1), mpc(1)),), digits=40)
        value = cdf_from_laplace(s, gamma_laplace(2), 1)
        assert abs(value - mpf("0.25")) < mpf(10) ** -38

    def test_clamped(self, ctx40):
        """Values above one are clamped; the raw value is kept."""
        s = ExpSum(terms=((mpc(2), mpc(1)),), digits=40)
        diagnostics = {}
        assert cdf_from_laplace(s, exponential_laplace(1), 3, diagnostics) == 1
        assert abs(diagnostics["raw"] - mpf("1.5")) < mpf(10) ** -38

    def test_invalid_arguments(self, ctx40):
        """u must be positive and law parameters positive."""
        s = ExpSum(terms=((mpc(1), mpc(1)),), digits=40)
        with pytest.raises(ValueError):
            cdf_from_laplace(s, exponential_laplace(1), 0)
        with pytest.raises(ValueError):
            exponential_laplace(-1)


# =============================================================================
# Coefficient files
# =============================================================================

class TestCoefficientFiles:
    """JSON files with full-precision decimal strings."""

    def test_save_and_load(self, tmp_path, ctx40):
        """Terms, settings and provenance survive a file."""
        cfg = ApproxConfig(M=2, n_inf=2, A="1", B="2", digits=40)
        s = ExpSum(
            terms=((mpc(1, 2) / 3, mpc(2, 1) / 7), (mpc(1, -2) / 3, mpc(2, -1) / 7)),
            digits=40,
            config=cfg,
            target="hockey_stick",
        )
        path = save_expsum(s, tmp_path / "out" / "s.json", RunManifest(command="approx"))
        loaded = load_expsum(path)
        assert loaded.terms == s.terms
        assert loaded.config == cfg
        assert loaded.target == "hockey_stick"
        assert json.loads(path.read_text())["manifest"]["command"] == "approx"

    def test_missing_file(self, tmp_path):
        """A missing file is reported as a coefficient-file error."""
        with pytest.raises(CoefficientFileError):
            load_expsum(tmp_path / "absent.json")

    def test_malformed_json(self, tmp_path):
        """Broken JSON is reported as a coefficient-file error."""
        path = tmp_path / "bad.json"
        path.write_text("{")
        with pytest.raises(CoefficientFileError):
            load_expsum(path)

    def test_term_count_mismatch(self, tmp_path):
        """M must equal the number of listed terms."""
        path = tmp_path / "short.json"
        path.write_text(json.dumps({"M": 2, "digits": 40, "terms": []}))
        with pytest.raises(CoefficientFileError):
            load_expsum(path)


# =============================================================================
# Reference runs
# =============================================================================

@pytest.mark.slow
class TestReferenceRuns:
    """Full-size runs at 100 digits."""

    def test_gaussian(self):
        """Twenty-four terms reach L1 and Linf within a factor 5 of 6.4e-23 and 5e-23."""
        cfg = ApproxConfig(M=24, n_inf=2, A="6.5", B="16", digits=100)
        _, report = approximate(get_target("gaussian"), cfg)
        assert mpf("1e-23") < report.linf < mpf("2.5e-22")
        assert mpf("1.28e-23") < report.l1 < mpf("3.2e-22")

    def test_hockey_stick(self):
        """Thirty terms on B = 83 keep max|c| within a factor 2 of 56.4."""
        cfg = ApproxConfig(M=30, n_inf=4, A="0", B="83", digits=100)
        _, report = approximate(get_target("hockey_stick"), cfg)
        assert mpf("28.2") < report.max_abs_c < mpf("112.8")
        assert mpf("1.27e-4") < report.l1 < mpf("1.14e-3")

    def test_hockey_stick_short_segment(self):
        """B = 78 converges but its coefficients are an order of magnitude larger."""
        target = get_target("hockey_stick")
        _, short = approximate(target, ApproxConfig(M=30, n_inf=4, A="0", B="78", digits=100))
        _, wide = approximate(target, ApproxConfig(M=30, n_inf=4, A="0", B="83", digits=100))
        assert 450 < short.max_abs_c < 1800
        assert short.max_abs_c > 10 * wide.max_abs_c
        assert short.l1 < mpf("1e-3")

    def test_hockey_stick_fifteen_terms(self):
        """Fifteen terms on B = 39 reach L1 within a factor 3 of 1.4e-3."""
        cfg = ApproxConfig(M=15, n_inf=2, A="0", B="39", digits=100)
        _, report = approximate(get_target("hockey_stick"), cfg)
        assert mpf("4.7e-4") < report.l1 < mpf("4.2e-3")

    def test_gompertz_makeham(self):
        """Fourteen terms reach Linf within a factor 5 of 1.5e-7."""
        cfg = ApproxConfig(M=14, n_inf=2, A="0.1", B="0.9", digits=100)
        _, report = approximate(get_target("gompertz_makeham"), cfg)
        assert mpf("3e-8") < report.linf < mpf("7.5e-7")

    def test_gompertz_makeham_twenty_eight_terms(self):
        """Twenty-eight terms reach Linf within a factor 5 of 2.2e-12."""
        cfg = ApproxConfig(M=28, n_inf=4, A="0.12", B="1.65", digits=100)
        _, report = approximate(get_target("gompertz_makeham"), cfg)
        assert mpf("4.4e-13") < report.linf < mpf("1.1e-11")

    def test_lognormal_density(self):
        """The density from thirty terms is accurate on a log grid down to 1e-8."""
        cfg = ApproxConfig(M=30, n_inf=6, A="1.7", B="12", digits=100)
        s, report = approximate(get_target("lognormal_survival", {"sigma": "1"}), cfg)
        assert s.transform == "negate_derivative"
        assert min(x for x, _ in report.grid if x > 0) <= mpf("1.01e-8")
        assert max(x for x, _ in report.grid) == 100
        assert report.linf < mpf("1e-6")


@pytest.mark.slow
class TestReferenceSweeps:
    """Sweeps over the segments of the reference runs."""

    def test_gaussian_grid(self):
        """The 3 x 3 grid around (3.5, 10.5) lands on it or on a neighbour as good."""
        result = sweep(
            get_target("gaussian"), 12, 2, ["3", "3.5", "4"], ["10", "10.5", "11"], "l1", digits=60
        )
        assert len(result.rows) == 9
        if (result.config.A, result.config.B) != ("3.5", "10.5"):
            centre = [row for row in result.rows if (row.A, row.B) == ("3.5", "10.5")][0]
            assert centre.l1 <= 3 * result.report.l1

    def test_coefficient_bound(self):
        """maxc:100 rejects B = 78 and keeps B = 83."""
        result = sweep(get_target("hockey_stick"), 30, 4, ["0"], ["78", "83"], "maxc:100", digits=100)
        statuses = {row.B: row.status for row in result.rows}
        assert statuses["78"].startswith("rejected")
        assert statuses["83"] == "ok"
        assert result.config.B == "83"
