"""
Tests for padesum.laplace: double-exponential quadrature and batch evaluation.

Run with:
    pytest tests/test_laplace.py -v
"""

import sys
from pathlib import Path

import pytest
from mpmath import mp, mpc, mpf

PROJECT_ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(PROJECT_ROOT))

from padesum.errors import EvaluationError, NonConvergent  # noqa: E402
from padesum.laplace import (  # noqa: E402
    LaplaceEvaluator,
    QuadratureParams,
    auto_quadrature,
    de_quadrature,
    eval_many,
    piecewise_quadrature,
)
from padesum.padecf import build_points  # noqa: E402
from padesum.targets import gaussian, get_target  # noqa: E402


def decay(x):
    return mp.exp(-x)


def relative_error(got, want):
    return abs(got - want) / abs(want)


# =============================================================================
# Quadrature
# =============================================================================

class TestQuadrature:
    """Adaptive double-exponential quadrature on the half-line."""

    def test_exponential(self, ctx40):
        """The transform of exp(-x) at z = 1 is 1/2."""
        value = auto_quadrature(decay, 1, 40)
        assert relative_error(value, mpf(1) / 2) < mpf(10) ** -33

    def test_oscillating_point(self, ctx40):
        """The transform of exp(-x) at z = 2i is 1/(1 + 2i)."""
        value = auto_quadrature(decay, mpc(0, 2), 40)
        assert relative_error(value, 1 / mpc(1, 2)) < mpf(10) ** -33

    @pytest.mark.parametrize("z", [mpc(0), mpc(1, 2), mpc("3.5", "-1")])
    def test_gaussian_against_erfc(self, ctx40, gaussian_laplace_exact, z):
        """Numeric transform of exp(-x^2) agrees with the erfc formula."""
        value = auto_quadrature(lambda x: mp.exp(-x * x), z, 40)
        assert relative_error(value, gaussian_laplace_exact(z)) < mpf(10) ** -33

    def test_term_budget(self, ctx40):
        """A single pass that cannot settle within its term budget fails."""
        with pytest.raises(NonConvergent):
            de_quadrature(decay, 1, QuadratureParams(h="0.5", max_terms=2))

    def test_halving_budget(self, ctx40):
        """No halvings allowed means no agreement test can pass."""
        with pytest.raises(NonConvergent):
            auto_quadrature(decay, 1, 40, max_halvings=0)

    def test_invalid_step(self):
        """A non-positive step is refused."""
        with pytest.raises(ValueError):
            QuadratureParams(h=0)


class TestPiecewiseQuadrature:
    """Integrands with a kink or jump, split at the breakpoint."""

    @pytest.mark.parametrize(
        "target,integrand",
        [
            ("hockey_stick", lambda x: max(1 - x, mpf(0))),
            ("unit_step", lambda x: mpf(1) if x <= 1 else mpf(0)),
        ],
    )
    def test_matches_closed_form_on_segment(self, ctx40, target, integrand):
        """Twenty points on the A = 0, B = 39 segment agree to digits - 10."""
        closed = get_target(target).laplace
        numeric = LaplaceEvaluator.numeric(integrand, breakpoints=(1,))
        for z in build_points(20, 0, 39):
            want = closed(z)
            assert relative_error(numeric(z), want) < mpf(10) ** -30

    def test_smooth_tail(self, ctx40):
        """A breakpoint inside a smooth integrand changes nothing."""
        value = piecewise_quadrature(decay, 2, 40, [mpf("0.5"), 3])
        assert relative_error(value, mpf(1) / 3) < mpf(10) ** -33

    def test_breakpoints_must_be_positive(self, ctx40):
        """Breakpoints at or left of the origin are refused."""
        with pytest.raises(ValueError):
            piecewise_quadrature(decay, 1, 40, [0])


# =============================================================================
# Evaluators
# =============================================================================

class TestLaplaceEvaluator:
    """Closed-form and numeric evaluators."""

    def test_closed_form(self, ctx40):
        """A closed form is called directly."""
        evaluator = LaplaceEvaluator.closed_form(lambda z: 1 / (z + 1))
        assert not evaluator.is_numeric
        assert evaluator(1) == mpc("0.5")

    def test_numeric(self, ctx40):
        """A numeric evaluator integrates at the active precision."""
        evaluator = LaplaceEvaluator.numeric(decay)
        assert evaluator.is_numeric
        assert relative_error(evaluator(3), mpf(1) / 4) < mpf(10) ** -33

    def test_left_half_plane(self, ctx40):
        """Re z < 0 is outside the evaluated region."""
        evaluator = LaplaceEvaluator.closed_form(lambda z: 1 / (z + 1))
        with pytest.raises(ValueError):
            evaluator(mpc(-1, 1))


# =============================================================================
# Batches
# =============================================================================

class TestEvalMany:
    """Batch evaluation in input order."""

    def test_order_preserved(self, ctx40):
        """Results line up with the inputs."""
        evaluator = LaplaceEvaluator.closed_form(lambda z: 1 / (z + 1))
        values = eval_many(evaluator, [0, 1, 3])
        assert values == [mpc(1), mpc("0.5"), mpc("0.25")]

    def test_failure_reports_index(self, ctx40):
        """The first failing point is named by its index."""
        evaluator = LaplaceEvaluator.closed_form(lambda z: 1 / (z - 2))
        with pytest.raises(EvaluationError) as excinfo:
            eval_many(evaluator, [0, 1, 2, 3])
        assert excinfo.value.index == 2

    def test_conjugate_symmetry(self, ctx40):
        """Real integrands give conjugate values at conjugate points."""
        evaluator = gaussian().laplace
        a, b = eval_many(evaluator, [mpc(1, 3), mpc(1, -3)])
        assert abs(a - b.conjugate()) <= mpf(10) ** -33 * abs(a)

    @pytest.mark.slow
    def test_parallel_matches_serial(self, ctx40):
        """Worker processes return the same values as a serial run."""
        evaluator = gaussian().laplace
        zs = [mpc(1, 2), mpc(0), mpc(2, -1), mpc("0.5", 4)]
        assert eval_many(evaluator, zs, jobs=2) == eval_many(evaluator, zs, jobs=1)
