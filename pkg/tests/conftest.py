"""
Shared fixtures for the Padesum test suite.
"""

import sys
from pathlib import Path

import pytest
import yaml
from mpmath import mp

PROJECT_ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(PROJECT_ROOT))

from padesum.polyrat import PrecisionContext  # noqa: E402


@pytest.fixture
def ctx40():
    """40-digit working precision for the duration of a test."""
    with PrecisionContext(40) as ctx:
        yield ctx


@pytest.fixture
def ctx100():
    with PrecisionContext(100) as ctx:
        yield ctx


@pytest.fixture
def gaussian_laplace_exact():
    """(sqrt(pi)/2) exp(z^2/4) erfc(z/2), the transform of exp(-x^2)."""

    def laplace(z):
        return mp.sqrt(mp.pi) / 2 * mp.exp(z * z / 4) * mp.erfc(z / 2)

    return laplace


@pytest.fixture
def fast_config(tmp_path):
    """Config file with a coarse error grid so CLI runs stay quick."""
    path = tmp_path / "config.yaml"
    path.write_text(
        yaml.safe_dump(
            {
                "precision": {"digits": 40},
                "metrics": {"n_grid": 200, "digits": 32},
                "logging": {"level": "WARNING"},
            }
        )
    )
    return path
