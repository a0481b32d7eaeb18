"""Runtime settings read from the environment (and a local `.env`)."""

import os
from typing import Literal

from dotenv import load_dotenv
from pydantic import ConfigDict
from pydantic.dataclasses import dataclass

load_dotenv()

EngineChoice = Literal["auto", "contract", "pm1", "ppm1", "pow2"]

DEFAULT_BUDGET = 10_000_000
DEFAULT_PRECISION = 10


def _int_env(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or not raw.strip():
        return default
    try:
        value = int(raw)
    except ValueError:
        return default
    return value if value > 0 else default


@dataclass(config=ConfigDict(extra="forbid", frozen=True), kw_only=True)
class SolverSettings:
    """Knobs shared by the driver, the engines and the CLI."""

    budget: int = DEFAULT_BUDGET
    """Maximum number of search states for oracle-style searches."""
    precision: int = DEFAULT_PRECISION
    """Target lift precision M (residuals of valuation >= M)."""
    engine: EngineChoice = "auto"
    """Engine override; `auto` follows the dispatch predicate."""

    def __post_init__(self) -> None:
        """Reject non-positive budgets and precisions."""
        if self.budget <= 0:
            msg = f"budget must be positive, got {self.budget}"
            raise ValueError(msg)
        if self.precision <= 0:
            msg = f"precision must be positive, got {self.precision}"
            raise ValueError(msg)

    @classmethod
    def from_env(cls, **overrides: object) -> "SolverSettings":
        """Build settings from `PADIC_WITNESS_BUDGET` / `PADIC_PRECISION`.

        Keyword overrides that are not `None` win over the environment.
        """
        values: dict[str, object] = {
            "budget": _int_env("PADIC_WITNESS_BUDGET", DEFAULT_BUDGET),
            "precision": _int_env("PADIC_PRECISION", DEFAULT_PRECISION),
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)  # type: ignore[arg-type]
