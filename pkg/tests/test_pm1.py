"""The k = p - 1 engine: reduction shortcuts, critical systems, block solvers."""

from __future__ import annotations

import numpy as np
import pytest

from padicsol import CertificateKind, DiagLinSystem, PadicContext, Transcript
from padicsol._errors import NotApplicable, PreconditionViolated
from padicsol.core import vp
from padicsol.engines.base import EngineResult, check_payload
from padicsol.engines.pm1 import (
    critical_profile,
    pin_header_pair,
    reduce_to_critical,
    solve_critical,
    solve_high_block_system,
    solve_low_block_system,
    solve_pm1,
)
from padicsol.hensel import solve_from_witness


@pytest.fixture(scope="module")
def critical_system() -> DiagLinSystem:
    """Header (1, 4) with theta = 1 and blocks 1, 5, 25, 125."""
    return DiagLinSystem.of(
        [1, 4] + [1] * 4 + [5] * 4 + [25] * 4 + [125] * 4,
        [1, -1] + [0] * 16,
    )


def test_pin_header_pair(ctx_p5: PadicContext) -> None:
    x1, x2, c_prime = pin_header_pair(6, 19, 1, 1, 1, ctx_p5)
    assert (x1, x2, c_prime) == (9, 4, 8846)
    assert 6 * x1**4 + 19 * x2**4 == 5 * c_prime
    assert x1 - x2 == 5


@pytest.mark.parametrize(
    ("c", "d", "level"), [(1, 1, 2), (5, 1, 1), (1, 0, 1), (1, 1, 0)]
)
def test_pin_header_pair_preconditions(
    ctx_p5: PadicContext, c: int, d: int, level: int
) -> None:
    with pytest.raises(PreconditionViolated):
        pin_header_pair(6, 19, c, d, level, ctx_p5)


def test_engine_needs_k_equal_p_minus_one(ctx_p2: PadicContext) -> None:
    with pytest.raises(NotApplicable, match="p >= 5"):
        pin_header_pair(1, 1, 1, 1, 1, ctx_p2)


def test_critical_profile(
    ctx_p5: PadicContext, critical_system: DiagLinSystem
) -> None:
    profile = critical_profile(Transcript.start(critical_system, 4), ctx_p5)
    assert profile.valid
    assert profile.failed == ()
    assert profile.theta == 1
    assert profile.classes == (1, 1, 1, 1)
    assert profile.blocks[0] == (2, 3, 4, 5)
    assert profile.blocks[3] == (14, 15, 16, 17)


def test_profile_names_broken_conditions(ctx_p5: PadicContext) -> None:
    system = DiagLinSystem.of(
        [1, 4] + [1] * 4 + [5, 10, 5, 5] + [25] * 4 + [125] * 4,
        [1, 1] + [0] * 16,
    )
    profile = critical_profile(Transcript.start(system, 4), ctx_p5)
    assert not profile.valid
    assert profile.failed == ("header", "block-classes")
    with pytest.raises(PreconditionViolated, match="not a critical system"):
        solve_critical(profile, ctx_p5)


def test_theta_block_route(
    ctx_p5: PadicContext, critical_system: DiagLinSystem
) -> None:
    profile = critical_profile(Transcript.start(critical_system, 4), ctx_p5)
    result = solve_critical(profile, ctx_p5)
    assert result.route == "theta-block"
    assert result.kind == CertificateKind.NEWTON_LINE
    assert result.line is not None
    assert result.line.point == (0, 0, 1, 1, 1, 1)
    assert result.line.direction == (1, 1, 0, 0, 0, 0)
    assert result.line.t0 == 1
    assert check_payload(result, result.transcript.system)


def test_low_level_zero_shortcut(ctx_p5: PadicContext) -> None:
    system = DiagLinSystem.of([1] * 17 + [5], [0] * 17 + [1])
    outcome = reduce_to_critical(Transcript.start(system, 4), ctx_p5)
    assert isinstance(outcome, EngineResult)
    assert outcome.route == "low-level-zero"
    assert outcome.hensel is not None
    lifted = solve_from_witness(outcome.hensel, 8)
    big_a, big_b = system.form_values(lifted.x, 4)
    assert big_b == 0
    assert vp(big_a.numerator, 5) >= 8


def test_wide_level_zero_shortcut(ctx_p5: PadicContext) -> None:
    system = DiagLinSystem.of([1] * 7 + [5] * 11, [1] + [0] * 17)
    result = solve_pm1(Transcript.start(system, 4), ctx_p5)
    assert result.route == "wide-level-zero"
    assert result.kind == CertificateKind.HENSEL_WITNESS
    assert check_payload(result, system)


def test_small_systems_are_not_reduced(ctx_p5: PadicContext) -> None:
    system = DiagLinSystem.of([1] * 6, [1] * 6)
    with pytest.raises(NotApplicable, match="k\\^2 \\+ 2"):
        reduce_to_critical(Transcript.start(system, 4), ctx_p5)
    result = solve_pm1(Transcript.start(system, 4), ctx_p5)
    assert not result.resolved
    assert result.route == "reduce"


def test_low_block_system(ctx_p5: PadicContext) -> None:
    lifted = solve_low_block_system(
        6, 19, (1, 1, 1, 1), (0, 0, 0, 0), 0, 1, 1, ctx_p5
    )
    assert len(lifted.x) == 7
    system = DiagLinSystem.of([6, 19, 5, 5, 5, 5, 0], [1, -1, 0, 0, 0, 0, 5])
    big_a, big_b = system.form_values(lifted.x, 4)
    assert big_b == 0
    assert vp(big_a.numerator, 5) >= lifted.precision
    assert lifted.x[lifted.nonzero_index] != 0


def test_high_block_system_below_theta(ctx_p5: PadicContext) -> None:
    lifted = solve_high_block_system(
        6, 19, (1, 1, 1, 1), (1, 1, 1, 1), 1, ctx_p5, precision=12
    )
    assert len(lifted.x) == 6
    system = DiagLinSystem.of([6, 19, 5, 5, 5, 5], [1, -1, 5, 5, 5, 5])
    big_a, big_b = system.form_values(lifted.x, 4)
    assert big_b == 0
    assert vp(big_a.numerator, 5) >= 12


def test_block_solver_preconditions(ctx_p5: PadicContext) -> None:
    with pytest.raises(PreconditionViolated, match="unit"):
        solve_low_block_system(6, 19, (1, 1), (0, 0), 0, 5, 1, ctx_p5)
    with pytest.raises(PreconditionViolated, match="congruent"):
        solve_high_block_system(6, 19, (1, 2), (1, 1), 1, ctx_p5)
    with pytest.raises(PreconditionViolated, match="level"):
        solve_high_block_system(6, 19, (1, 1), (1, 1), 3, ctx_p5)


def _planted(theta: int, c: int, b_at: dict[int, int]) -> DiagLinSystem:
    """Critical layout with a_1 + a_2 = c 5^theta and chosen block b_i."""
    b = [1, -1] + [0] * 16
    for i, value in b_at.items():
        b[i] = value
    return DiagLinSystem.of(
        [1, -1 + c * 5**theta] + [1] * 4 + [5] * 4 + [25] * 4 + [125] * 4,
        b,
    )


@pytest.mark.parametrize(
    ("theta", "c", "b_at", "route"),
    [
        (1, 3, {6: 5, 7: 5}, "theta-level/spread"),
        (1, 4, {6: 5, 7: 5}, "theta-level/shifted-pair"),
        (1, 3, {6: 5}, "theta-level/single-unit"),
        (1, 1, {6: 5}, "theta-level/single-unit-shifted"),
        (2, 1, {10: 5}, "low-below-theta"),
        (4, 1, {6: 5}, "equal-below-theta"),
        (4, 1, {}, "theta-block"),
        (5, 1, {6: 25}, "sweep-low"),
        (6, 1, {6: 625}, "sweep-equal"),
        (5, 1, {6: 625}, "sweep-theta/single-unit-shifted"),
    ],
)
def test_critical_routes(
    ctx_p5: PadicContext,
    theta: int,
    c: int,
    b_at: dict[int, int],
    route: str,
) -> None:
    profile = critical_profile(
        Transcript.start(_planted(theta, c, b_at), 4), ctx_p5
    )
    assert profile.valid
    assert profile.theta == theta
    result = solve_critical(profile, ctx_p5)
    assert result.route == route
    assert result.resolved
    assert check_payload(result, result.transcript.system)


@pytest.mark.slow
def test_random_critical_systems_resolve(
    ctx_p5: PadicContext, seeded: int
) -> None:
    rng = np.random.default_rng(seeded)
    solved = 0
    for _ in range(300):
        theta = int(rng.integers(1, 8))
        c = int(rng.integers(1, 5))
        b_at = {}
        for i in range(6, 18):
            if rng.random() < 0.5:
                m = int(rng.integers(1, 9))
                b_at[i] = int(rng.choice([1, -1, 2, -2])) * 5**m
        profile = critical_profile(
            Transcript.start(_planted(theta, c, b_at), 4), ctx_p5
        )
        if not profile.valid:
            continue
        result = solve_critical(profile, ctx_p5)
        assert result.resolved, (theta, c, b_at)
        assert check_payload(result, result.transcript.system)
        solved += 1
    assert solved > 0
