"""Exhaustive congruence search, checked against full enumeration."""

from __future__ import annotations

import random

import pytest

from padicsol import (
    CertificateKind,
    DiagLinSystem,
    PadicContext,
    solve,
    verify,
)
from padicsol._errors import BudgetExceeded, ContextNotApplicable
from padicsol.core import find_unit_minor
from padicsol.oracle import (
    CongruenceQuery,
    enumerate_solutions,
    find_nonsingular,
    find_unit_solution,
    gamma_star_bruteforce,
    naive_nonsingular,
)


def test_no_nonsingular_solution(ctx_p5: PadicContext) -> None:
    # Five unit x^4 terms need all five coordinates, which kills B.
    system = DiagLinSystem.of([1] * 5, [1, 0, 0, 0, 0])
    report = find_nonsingular(CongruenceQuery(system=system, ctx=ctx_p5))
    assert not report.found
    assert report.exhausted


def test_witness_is_a_nonsingular_solution(ctx_p5: PadicContext) -> None:
    system = DiagLinSystem.of([1] * 6, [1, -1, 0, 0, 0, 0])
    report = find_nonsingular(CongruenceQuery(system=system, ctx=ctx_p5))
    assert report.found
    assert report.witness is not None
    big_a, big_b = system.form_values(report.witness, 4)
    assert big_a % 5 == 0
    assert big_b % 5 == 0
    assert report.nonsingular_pivot == find_unit_minor(
        system, report.witness, 4, 5
    )


def test_agrees_with_naive_enumeration(
    ctx_p5: PadicContext, seeded: int
) -> None:
    rng = random.Random(seeded)
    for _ in range(25):
        system = DiagLinSystem.of(
            [rng.randrange(25) for _ in range(4)],
            [rng.randrange(5) for _ in range(4)],
        )
        query = CongruenceQuery(system=system, ctx=ctx_p5)
        assert find_nonsingular(query).found == naive_nonsingular(query).found


def test_agrees_with_naive_enumeration_mod_9(ctx_p3: PadicContext) -> None:
    rng = random.Random(3)
    for _ in range(10):
        system = DiagLinSystem.of(
            [rng.randrange(1, 27) for _ in range(3)],
            [rng.randrange(3) for _ in range(3)],
        )
        query = CongruenceQuery(system=system, ctx=ctx_p3)
        assert find_nonsingular(query).found == naive_nonsingular(query).found


@pytest.mark.slow
def test_agrees_with_full_enumeration_at_2(
    ctx_p2: PadicContext, seeded: int
) -> None:
    rng = random.Random(seeded)
    for _ in range(200):
        s = rng.randrange(2, 15)
        system = DiagLinSystem.of(
            [rng.randrange(1, 64) for _ in range(s)],
            [rng.randrange(4) for _ in range(s)],
        )
        query = CongruenceQuery(system=system, ctx=ctx_p2)
        # x^4 mod 16 and the minors mod 2 depend only on parity.
        expected = any(
            find_unit_minor(system, x, 4, 2) is not None
            for x in enumerate_solutions(query)
        )
        report = find_nonsingular(query)
        assert report.exhausted
        assert report.found == expected, system


@pytest.mark.slow
def test_agrees_with_naive_enumeration_at_larger_sizes(
    ctx_p2: PadicContext, ctx_p5: PadicContext
) -> None:
    rng = random.Random(11)
    for ctx, s, count in ((ctx_p2, 3, 20), (ctx_p5, 5, 20), (ctx_p5, 6, 10)):
        p = ctx.p
        for _ in range(count):
            system = DiagLinSystem.of(
                [rng.randrange(1, p**3) for _ in range(s)],
                [rng.randrange(p) for _ in range(s)],
            )
            query = CongruenceQuery(system=system, ctx=ctx)
            naive = naive_nonsingular(query)
            assert find_nonsingular(query).found == naive.found, system


def test_small_budget_skips_the_search(ctx_p5: PadicContext) -> None:
    system = DiagLinSystem.of([1] * 6, [1, -1, 0, 0, 0, 0])
    report = find_nonsingular(
        CongruenceQuery(system=system, ctx=ctx_p5, budget=10)
    )
    assert not report.found
    assert not report.exhausted
    with pytest.raises(BudgetExceeded):
        naive_nonsingular(
            CongruenceQuery(system=system, ctx=ctx_p5, budget=10)
        )


def test_generic_flag_is_required_without_tau() -> None:
    ctx = PadicContext.of(5, 6)
    system = DiagLinSystem.of([1, 1, 1], [1, 1, 1])
    with pytest.raises(ContextNotApplicable):
        find_nonsingular(CongruenceQuery(system=system, ctx=ctx))
    report = find_nonsingular(
        CongruenceQuery(system=system, ctx=ctx, generic=True)
    )
    assert report.exhausted


def test_enumerate_solutions_order(ctx_p5: PadicContext) -> None:
    system = DiagLinSystem.of([1] * 5, [0] * 5)
    solutions = enumerate_solutions(
        CongruenceQuery(system=system, ctx=ctx_p5)
    )
    assert next(solutions) == (1, 1, 1, 1, 1)


def test_gamma_star_quartic_mod_5() -> None:
    report = gamma_star_bruteforce(4, 5, 1)
    assert report.gamma_star == 5
    assert report.exhausted
    assert report.counterexample == (1, 1, 1, 1)


@pytest.mark.parametrize(
    ("p", "counterexample"), [(5, (1, 2)), (7, (1, 1))]
)
def test_gamma_star_for_squares(
    p: int, counterexample: tuple[int, ...]
) -> None:
    report = gamma_star_bruteforce(2, p, 1)
    assert report.gamma_star == 3
    assert report.exhausted
    assert report.counterexample == counterexample


def test_gamma_star_budget_reports_lower_bound() -> None:
    with pytest.raises(BudgetExceeded) as info:
        gamma_star_bruteforce(4, 5, 1, coeff_budget=10)
    assert info.value.lower_bound == 1


def test_find_unit_solution() -> None:
    assert find_unit_solution([1, 1], 4, 5, 1) is None
    found = find_unit_solution([1, 4], 4, 5, 1)
    assert found is not None
    point, pivot = found
    assert (point[0] ** 4 + 4 * point[1] ** 4) % 5 == 0
    assert point[pivot] % 5


def test_cycling_system_has_no_nonsingular_solution_mod_16(
    ctx_p2: PadicContext, cycling_system: DiagLinSystem
) -> None:
    report = find_nonsingular(
        CongruenceQuery(system=cycling_system, ctx=ctx_p2)
    )
    assert not report.found
    assert report.exhausted
    cert = solve(cycling_system, 2, 4)
    assert cert.kind == CertificateKind.HENSEL_WITNESS
    assert cert.route == "cycling"
    assert verify(cert, cycling_system).ok
