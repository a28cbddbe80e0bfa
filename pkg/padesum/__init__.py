"""
Padesum - Exponential-Sum Approximation
=======================================

Approximates functions on the half-line by sums of exponentials through
multi-point Pade approximation of their Laplace transforms.

Example usage:
    from padesum import ExpSumApproximator

    approximator = ExpSumApproximator()
    s, report = approximator.approximate("gaussian", M=24, n_inf=2, A="6.5", B="16")
    print(report.summary())
"""

__version__ = "1.0.0"
__author__ = "Padesum Developers"

from padesum.core import ExpSumApproximator  # noqa: E402

__all__ = ["ExpSumApproximator", "__version__"]
