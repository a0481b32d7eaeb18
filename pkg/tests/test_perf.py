"""Performance budgets for the hot-path operations.

Budgets are sanity ceilings with generous headroom for CI containers;
they catch a search that stopped collapsing residues or a descent that
went exponential, not small regressions.

Run with: `pytest tests/test_perf.py -v`
"""

from __future__ import annotations

import random
import time

import pytest

from padicsol import (
    CertificateKind,
    DiagLinSystem,
    PadicContext,
    SolverSettings,
    solve,
    verify,
)
from padicsol.descent import build_descent, verify_descent
from padicsol.oracle import CongruenceQuery, find_nonsingular

SOLUTION_KINDS = {
    CertificateKind.EXACT_RATIONAL,
    CertificateKind.HENSEL_WITNESS,
    CertificateKind.NEWTON_LINE,
}


def test_cycling_solve_under_2s(cycling_system: DiagLinSystem) -> None:
    """The level-rotating p = 2 route plus its precision demo."""
    t0 = time.perf_counter()
    cert = solve(cycling_system, 2, 4, precision=12)
    elapsed = time.perf_counter() - t0
    assert cert.kind == CertificateKind.HENSEL_WITNESS
    assert elapsed < 2.0, f"cycling solve took {elapsed:.2f}s (budget: <2s)"


def test_oracle_collapse_under_1s(ctx_p5: PadicContext) -> None:
    """Eighteen variables mod 5 with the unit-power collapse.

    The naive space is 5^18; the collapsed search only tracks the pair
    of residues, so it must stay far below a second.
    """
    system = DiagLinSystem.of(
        [1, 2, 3, 4, 5, 6] * 3, [1, 0, 2, 0, 3, 0] * 3
    )
    t0 = time.perf_counter()
    report = find_nonsingular(CongruenceQuery(system=system, ctx=ctx_p5))
    elapsed = time.perf_counter() - t0
    assert report.exhausted
    assert elapsed < 1.0, f"oracle took {elapsed:.2f}s (budget: <1s)"


@pytest.mark.parametrize("p", [7, 13])
def test_descent_build_and_verify_under_1s(p: int) -> None:
    t0 = time.perf_counter()
    verdict = verify_descent(build_descent(p))
    elapsed = time.perf_counter() - t0
    assert verdict
    assert elapsed < 1.0, f"descent p={p} took {elapsed:.2f}s (budget: <1s)"


@pytest.mark.slow
@pytest.mark.parametrize(
    ("k", "p", "count"),
    [(4, 2, 20), (4, 5, 20), (4, 7, 20), (6, 3, 10), (6, 7, 10), (8, 2, 6)],
)
def test_random_solutions_always_verify(k: int, p: int, count: int) -> None:
    """Every solution certificate on random s = k^2 + 2 systems verifies."""
    rng = random.Random(11)
    settings = SolverSettings(budget=200_000, precision=6)
    s = k * k + 2
    for _ in range(count):
        system = DiagLinSystem.of(
            [rng.randrange(1, p**k + 1) for _ in range(s)],
            [rng.randrange(-(p**2), p**2 + 1) for _ in range(s)],
        )
        cert = solve(system, p, k, settings=settings)
        if cert.kind in SOLUTION_KINDS:
            verdict = verify(cert, system)
            assert verdict, verdict.reason
