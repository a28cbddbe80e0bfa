#!/usr/bin/env python3
"""
Padesum Core Module
===================

Provides the ``ExpSumApproximator`` class for programmatic access.
"""

import logging
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Tuple, Union

from .config import load_config, resolve_jobs, target_x_max
from .expsum import ErrorReport, ExpSum, SweepResult, approximate, load_expsum, save_expsum, sweep
from .gammaapp import GammaApproximant
from .polyrat import PrecisionContext
from .schema import ApproxConfig, RunManifest
from .targets import TargetSpec, get_target

logger = logging.getLogger(__name__)


class ExpSumApproximator:
    """
    Exponential-sum approximation with configuration applied.

    Example:
        approximator = ExpSumApproximator()
        s, report = approximator.approximate("hockey_stick", M=5, n_inf=2, A="0.5", B="8.5")
        approximator.save(s, "h5.json")
    """

    def __init__(self, config_path: Optional[str] = None, jobs: Optional[int] = None):
        """
        Initialize the approximator.

        Args:
            config_path: Path to configuration YAML file
            jobs: Worker processes (``None`` uses the configured value)
        """
        self._config_path = config_path
        self._config: Optional[Dict[str, Any]] = None
        self._jobs = jobs

    @property
    def config(self) -> Dict[str, Any]:
        """Load and return configuration."""
        if self._config is None:
            self._config = load_config(self._config_path)
        return self._config

    @property
    def digits(self) -> int:
        return int(self.config["precision"]["digits"])

    @property
    def jobs(self) -> int:
        return resolve_jobs(self._jobs, self.config)

    def _options(self, target: TargetSpec) -> Dict[str, Any]:
        metrics = self.config["metrics"]
        return {
            "x_max": target_x_max(self.config, target.name, target.x_max),
            "n_grid": int(metrics["n_grid"]),
            "metrics_digits": int(metrics["digits"]),
            "log_x_min": float(metrics["log_x_min"]),
            "use_symmetry": bool(self.config["quadrature"]["use_symmetry"]),
        }

    def target(self, target: Union[str, TargetSpec], params: Optional[Dict[str, str]] = None) -> TargetSpec:
        if isinstance(target, TargetSpec):
            return target
        return get_target(target, params)

    def approximate(
        self,
        target: Union[str, TargetSpec],
        M: int,
        n_inf: int,
        A: Union[str, float],
        B: Union[str, float],
        params: Optional[Dict[str, str]] = None,
        digits: Optional[int] = None,
    ) -> Tuple[ExpSum, ErrorReport]:
        """
        Approximate a target with one configuration.

        Returns:
            The exponential sum and its error report.
        """
        spec = self.target(target, params)
        cfg = ApproxConfig(M=M, n_inf=n_inf, A=str(A), B=str(B), digits=digits or self.digits)
        return approximate(spec, cfg, jobs=self.jobs, **self._options(spec))

    def sweep(
        self,
        target: Union[str, TargetSpec],
        M: int,
        n_inf: int,
        A_grid: Sequence[Union[str, float]],
        B_grid: Sequence[Union[str, float]],
        objective: str = "l1",
        params: Optional[Dict[str, str]] = None,
    ) -> SweepResult:
        """Grid search over ``A`` and ``B``; see ``padesum.expsum.sweep``."""
        spec = self.target(target, params)
        return sweep(
            spec, M, n_inf, A_grid, B_grid, objective, digits=self.digits, jobs=self.jobs, **self._options(spec)
        )

    def gamma_approximant(self, s: ExpSum, estimate_bounds: bool = True) -> GammaApproximant:
        """Wrap a gamma-kernel sum for ln Gamma / ln G evaluation."""
        with PrecisionContext(max(s.digits, 32)):
            return GammaApproximant.from_expsum(
                s, estimate_bounds=estimate_bounds, x_max=float(self.config["gamma"]["x_max"])
            )

    def save(self, s: ExpSum, path: Union[str, Path], command: str = "api") -> Path:
        manifest = RunManifest(command=command, target=s.target, digits=s.digits, outputs=[str(path)])
        return save_expsum(s, path, manifest)

    def load(self, path: Union[str, Path]) -> ExpSum:
        return load_expsum(path)
