"""
Padesum Schemas
===============

Pydantic models for approximation settings, coefficient files and run
manifests. Numbers that must survive at full precision travel as decimal
strings.
"""

from datetime import datetime, timezone
from decimal import Decimal, InvalidOperation
from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, Field, field_validator, model_validator

from . import __version__


def _decimal(value: str, name: str) -> Decimal:
    try:
        return Decimal(str(value).strip())
    except InvalidOperation as exc:
        raise ValueError(f"{name} must be a decimal string, got {value!r}") from exc


# -----------------------------------------------------------------------------
# Approximation settings
# -----------------------------------------------------------------------------

class ApproxConfig(BaseModel):
    """
    One point of the design space: ``M`` terms, ``n_inf`` coefficients at
    infinity and the segment ``A +- iB`` carrying ``p = 2M - n_inf`` points.
    """

    M: int = Field(ge=1)
    n_inf: int = Field(ge=1)
    A: str
    B: str
    digits: int = Field(default=100, ge=32)

    @field_validator("A", "B", mode="before")
    @classmethod
    def _as_text(cls, value):
        return str(value).strip()

    @model_validator(mode="after")
    def _check(self) -> "ApproxConfig":
        if _decimal(self.A, "A") < 0:
            raise ValueError("A must be >= 0")
        if _decimal(self.B, "B") <= 0:
            raise ValueError("B must be > 0")
        if self.p < 2:
            raise ValueError(f"p = 2M - n_inf must be >= 2 (M={self.M}, n_inf={self.n_inf})")
        return self

    @property
    def p(self) -> int:
        return 2 * self.M - self.n_inf

    def label(self) -> str:
        return f"M={self.M} n_inf={self.n_inf} A={self.A} B={self.B}"


# -----------------------------------------------------------------------------
# Files
# -----------------------------------------------------------------------------

class ConfigModel(BaseModel):
    M: int
    n_inf: int
    A: str
    B: str


class TermModel(BaseModel):
    c_re: str
    c_im: str
    l_re: str
    l_im: str


class RunManifest(BaseModel):
    """Provenance stamped on every file the CLI writes."""

    command: str
    version: str = __version__
    target: Optional[str] = None
    params: Dict[str, str] = Field(default_factory=dict)
    config: Optional[ConfigModel] = None
    digits: Optional[int] = None
    inputs: List[str] = Field(default_factory=list)
    outputs: List[str] = Field(default_factory=list)
    timestamp: str = Field(default_factory=lambda: datetime.now(timezone.utc).isoformat())


class ExpSumFile(BaseModel):
    M: int
    digits: int
    config: Optional[ConfigModel] = None
    transform: Literal["identity", "negate_derivative"] = "identity"
    target: Optional[str] = None
    terms: List[TermModel]
    manifest: Optional[RunManifest] = None

    @model_validator(mode="after")
    def _count(self) -> "ExpSumFile":
        if len(self.terms) != self.M:
            raise ValueError(f"M={self.M} but {len(self.terms)} terms listed")
        return self
