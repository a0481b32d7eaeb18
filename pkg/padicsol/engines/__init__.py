"""Constructive engines, one per (k, p) family, plus the shared result type."""

from padicsol.engines.base import EngineResult, settle
from padicsol.engines.contract import dispatch_case, solve_contract
from padicsol.engines.pm1 import solve_pm1
from padicsol.engines.pow2 import solve_pow2
from padicsol.engines.ppm1 import solve_ppm1

__all__ = [
    "EngineResult",
    "dispatch_case",
    "settle",
    "solve_contract",
    "solve_pm1",
    "solve_pow2",
    "solve_ppm1",
]
