"""
Padesum Configuration
=====================

Default settings, YAML loading and logging setup.

Settings are resolved in this order (later wins):
  1. ``get_default_config()``
  2. ``config/config.yaml`` (or the file named by ``PADESUM_CONFIG``)
  3. environment variables ``EXPSUM_DIGITS`` and ``PADESUM_LOG_LEVEL``
"""

import copy
import logging
import os
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Any, Dict, Optional

import humanize
import psutil
import yaml
from rich.console import Console
from rich.logging import RichHandler

logger = logging.getLogger(__name__)
console = Console(stderr=True)

PROJECT_ROOT = Path(__file__).resolve().parent.parent
DEFAULT_CONFIG_PATH = PROJECT_ROOT / "config" / "config.yaml"


def get_default_config() -> Dict[str, Any]:
    """Get default configuration."""
    return {
        "precision": {
            "digits": 100,
        },
        "quadrature": {
            "use_symmetry": True,
        },
        "metrics": {
            "n_grid": 2000,
            "digits": 50,
            "log_x_min": 1e-8,
        },
        "targets": {
            "x_max": {
                "gaussian": 12,
                "gamma_kernel": 12,
                "gompertz_makeham": 60,
                "hockey_stick": 4,
                "unit_step": 4,
                "unit_step_via_hockey": 4,
                "lognormal_survival": 100,
            },
        },
        "gamma": {
            "x_max": 40,
        },
        "parallel": {
            "jobs": 1,
        },
        "logging": {
            "level": "INFO",
            "file": None,
            "console": True,
            "rotation": "10 MB",
        },
    }


def _merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    """Recursively merge ``override`` into a copy of ``base``."""
    merged = copy.deepcopy(base)
    for key, value in (override or {}).items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_config(config_path: Optional[str] = None) -> Dict[str, Any]:
    """
    Load configuration from YAML, merged over the defaults.

    Args:
        config_path: Explicit file. Falls back to ``PADESUM_CONFIG`` and then
            to ``config/config.yaml`` in the project root.

    Returns:
        Fully populated configuration dictionary.
    """
    config = get_default_config()
    path = config_path or os.getenv("PADESUM_CONFIG")
    config_file = Path(path).expanduser() if path else DEFAULT_CONFIG_PATH

    if config_file.exists():
        with open(config_file, "r") as f:
            loaded = yaml.safe_load(f) or {}
        if not isinstance(loaded, dict):
            raise ValueError(f"config file {config_file} must contain a mapping")
        config = _merge(config, loaded)
    elif path:
        console.print(f"[yellow]Config file not found at {config_file}[/yellow]")
        console.print("[yellow]Using default configuration...[/yellow]")

    digits = os.getenv("EXPSUM_DIGITS")
    if digits:
        try:
            config["precision"]["digits"] = int(digits)
        except ValueError:
            logger.warning("Ignoring non-integer EXPSUM_DIGITS=%r", digits)

    level = os.getenv("PADESUM_LOG_LEVEL")
    if level:
        config["logging"]["level"] = level.upper()

    return config


def _parse_rotation(rotation: Any) -> int:
    """Turn a size such as ``"10 MB"`` into a byte count."""
    if isinstance(rotation, (int, float)):
        return int(rotation)
    text = str(rotation).strip().upper()
    units = {"KB": 1024, "MB": 1024**2, "GB": 1024**3, "B": 1}
    for suffix, mult in units.items():
        if text.endswith(suffix):
            return int(float(text[: -len(suffix)].strip()) * mult)
    return int(float(text))


def setup_logging(config: Dict[str, Any]) -> None:
    """Install rich console logging and an optional rotating file log."""
    log_cfg = config.get("logging", {})
    level = getattr(logging, str(log_cfg.get("level", "INFO")).upper(), logging.INFO)

    root = logging.getLogger("padesum")
    root.setLevel(level)
    for handler in list(root.handlers):
        root.removeHandler(handler)

    if log_cfg.get("console", True):
        root.addHandler(RichHandler(console=console, show_path=False, rich_tracebacks=True))

    log_file = log_cfg.get("file")
    if log_file:
        max_bytes = _parse_rotation(log_cfg.get("rotation", "10 MB"))
        Path(log_file).expanduser().parent.mkdir(parents=True, exist_ok=True)
        file_handler = RotatingFileHandler(
            Path(log_file).expanduser(), maxBytes=max_bytes, backupCount=3
        )
        file_handler.setFormatter(
            logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s")
        )
        root.addHandler(file_handler)
        logger.debug("File logging to %s (rotation at %s)", log_file, humanize.naturalsize(max_bytes))


def resolve_jobs(jobs: Optional[int], config: Optional[Dict[str, Any]] = None) -> int:
    """
    Resolve the worker count.

    ``None`` uses the configured value; ``0`` means one worker per
    physical core.
    """
    if jobs is None:
        jobs = int(((config or {}).get("parallel") or {}).get("jobs", 1))
    if jobs < 0:
        raise ValueError(f"jobs must be >= 0, got {jobs}")
    if jobs == 0:
        jobs = psutil.cpu_count(logical=False) or psutil.cpu_count() or 1
    return jobs


def target_x_max(config: Dict[str, Any], name: str, default: float = 12) -> float:
    """Configured truncation point for a named target."""
    return float(config.get("targets", {}).get("x_max", {}).get(name, default))
