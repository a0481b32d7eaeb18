"""Shared fixtures for the padicsol test suite.

Frames are session-scoped (they are immutable); the systems are the small
hand-checked instances the engine tests build on. `seeded` resets the
Python and NumPy generators for tests that draw random systems.
"""

from __future__ import annotations

import json
from typing import TYPE_CHECKING

import pytest

from padicsol import DiagLinSystem, PadicContext, seed_everything
from padicsol.descent import counterexample_system

if TYPE_CHECKING:
    from pathlib import Path


@pytest.fixture(scope="session")
def ctx_p5() -> PadicContext:
    """p = 5, k = 4 (k = p - 1, gamma = 1)."""
    return PadicContext.of(5, 4)


@pytest.fixture(scope="session")
def ctx_p3() -> PadicContext:
    """p = 3, k = 6 (k = p (p - 1), gamma = 2)."""
    return PadicContext.of(3, 6)


@pytest.fixture(scope="session")
def ctx_p2() -> PadicContext:
    """p = 2, k = 4 (tau = 2, gamma = 4)."""
    return PadicContext.of(2, 4)


@pytest.fixture(scope="session")
def cycling_system() -> DiagLinSystem:
    """Fifteen x^4 outside the linear form plus three 8 x^4 tied by it."""
    return DiagLinSystem.of([1] * 15 + [8] * 3, [0] * 15 + [1] * 3)


@pytest.fixture(scope="session")
def counterexample_p5() -> DiagLinSystem:
    """The insoluble k = 4, s = 17 system for p = 5."""
    return counterexample_system(5)


@pytest.fixture
def seeded() -> int:
    """Reset every global generator to seed 0."""
    return seed_everything(0, verbose=False)


@pytest.fixture
def cycling_file(tmp_path: Path, cycling_system: DiagLinSystem) -> Path:
    """`cycling_system` as an input JSON file (json5 comment included)."""
    body = json.dumps(
        {
            "k": 4,
            "p": "2",
            "a": [str(v) for v in cycling_system.a],
            "b": [str(v) for v in cycling_system.b],
        },
        indent=2,
    )
    path = tmp_path / "cycling.json"
    path.write_text(f"// k = 4 cycling example\n{body}\n")
    return path
