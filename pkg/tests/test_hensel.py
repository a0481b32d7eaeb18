"""Witness checks and the three lifting shapes."""

from __future__ import annotations

import pytest
from sympy import Poly, symbols

from padicsol import DiagLinSystem, PadicContext
from padicsol._errors import PreconditionViolated
from padicsol.core import vp
from padicsol.hensel import (
    HenselWitness,
    bezout,
    LineWitness,
    check_line_witness,
    check_witness,
    classic_hensel,
    solve_from_line_witness,
    solve_from_witness,
)

t = symbols("t")


@pytest.fixture
def witness(ctx_p5: PadicContext) -> HenselWitness:
    """x = (1, 2, 1, 1, 1, 0) on six unit x^4 terms, pivot (0, 1)."""
    system = DiagLinSystem.of([1] * 6, [1, 2, 0, 0, 0, 0])
    return HenselWitness(
        x=(1, 2, 1, 1, 1, 0), pivot=(0, 1), ctx=ctx_p5, system=system
    )


def test_check_witness_accepts(witness: HenselWitness) -> None:
    verdict = check_witness(witness)
    assert verdict
    assert verdict.nonzero_index == 1


def test_check_witness_names_the_failure(witness: HenselWitness) -> None:
    broken = HenselWitness(
        x=(1, 2, 0, 1, 1, 0),
        pivot=witness.pivot,
        ctx=witness.ctx,
        system=witness.system,
    )
    verdict = check_witness(broken)
    assert not verdict
    assert verdict.reason is not None
    assert verdict.reason.startswith("A(x)")
    same = HenselWitness(
        x=witness.x, pivot=(0, 0), ctx=witness.ctx, system=witness.system
    )
    assert "bad pivot" in (check_witness(same).reason or "")
    flat = HenselWitness(
        x=witness.x, pivot=(2, 3), ctx=witness.ctx, system=witness.system
    )
    assert "minor" in (check_witness(flat).reason or "")


@pytest.mark.parametrize("precision", [1, 6, 15])
def test_solve_from_witness(witness: HenselWitness, precision: int) -> None:
    lifted = solve_from_witness(witness, precision)
    big_a, big_b = witness.system.form_values(lifted.x, 4)
    assert big_b == 0
    assert vp(big_a.numerator, 5) >= precision
    assert lifted.x[lifted.nonzero_index] != 0
    assert lifted.trace is not None
    assert lifted.trace.derivative_valuation == 0


def test_solve_from_witness_rejects_bad_witness(
    witness: HenselWitness,
) -> None:
    broken = HenselWitness(
        x=(1, 1, 1, 1, 1, 0),
        pivot=witness.pivot,
        ctx=witness.ctx,
        system=witness.system,
    )
    with pytest.raises(PreconditionViolated, match="witness rejected"):
        solve_from_witness(broken)


def test_pair_lift_with_derivative_valuation() -> None:
    # Each level sees v_2(phi') = v_2(4) = 2.
    ctx = PadicContext.of(2, 4)
    system = DiagLinSystem.of([1] * 17, [0] * 15 + [1, 2])
    x = (1,) * 15 + (0, 1)
    # Fifteen ones plus x_17 = 1 give A = 16; B = 2 is even.
    w = HenselWitness(x=x, pivot=(15, 16), ctx=ctx, system=system)
    assert check_witness(w)
    lifted = solve_from_witness(w, 12)
    big_a, big_b = system.form_values(lifted.x, 4)
    assert big_b == 0
    assert vp(big_a.numerator, 2) >= 12
    assert lifted.trace is not None
    assert lifted.trace.derivative_valuation == 2


def test_classic_hensel() -> None:
    f = Poly(t**2 - 2, t)
    root = classic_hensel(f, 3, 7, 10)
    assert (root**2 - 2) % 7**10 == 0
    with pytest.raises(PreconditionViolated, match="not divisible"):
        classic_hensel(f, 1, 7)


@pytest.fixture
def line(ctx_p5: PadicContext) -> LineWitness:
    """x^4 - 6 y^4 along x with y = 1, starting at t0 = 1."""
    return LineWitness(
        point=(0, 1),
        direction=(1, 0),
        t0=1,
        ctx=ctx_p5,
        system=DiagLinSystem.of([1, -6], [0, 0]),
    )


def test_line_witness(line: LineWitness) -> None:
    verdict = check_line_witness(line)
    assert verdict
    assert verdict.nonzero_index == 0
    lifted = solve_from_line_witness(line, 10)
    big_a, big_b = line.system.form_values(lifted.x, 4)
    assert big_b == 0
    assert vp(big_a.numerator, 5) >= 10
    assert lifted.x[1] == 1


def test_line_witness_failures(line: LineWitness) -> None:
    stalled = LineWitness(
        point=line.point,
        direction=line.direction,
        t0=0,
        ctx=line.ctx,
        system=line.system,
    )
    assert "Newton condition" in (check_line_witness(stalled).reason or "")
    off_line = LineWitness(
        point=line.point,
        direction=line.direction,
        t0=1,
        ctx=line.ctx,
        system=DiagLinSystem.of([1, -6], [0, 1]),
    )
    assert (check_line_witness(off_line).reason or "").startswith("B(P)")
    with pytest.raises(PreconditionViolated, match="line witness rejected"):
        solve_from_line_witness(stalled)


@pytest.mark.parametrize(("a", "b"), [(6, -4), (-9, 15), (7, 0), (1, 1)])
def test_bezout(a: int, b: int) -> None:
    u, v, g = bezout(a, b)
    assert all(type(n) is int for n in (u, v, g))
    assert u * a + v * b == g
    assert g >= 0
    assert a % g == 0
    assert b % g == 0


def test_higher_precision_lift_extends_the_lower_one(
    witness: HenselWitness,
) -> None:
    high = solve_from_witness(witness, 12)
    low = solve_from_witness(witness, 11)
    modulus = 5**11
    assert tuple(v % modulus for v in high.residues(5)) == low.residues(5)


def test_higher_precision_lift_extends_the_lower_one_at_2() -> None:
    ctx = PadicContext.of(2, 4)
    system = DiagLinSystem.of([1] * 17, [0] * 15 + [1, 2])
    w = HenselWitness(
        x=(1,) * 15 + (0, 1), pivot=(15, 16), ctx=ctx, system=system
    )
    high = solve_from_witness(w, 12)
    low = solve_from_witness(w, 11)
    assert tuple(v % 2**11 for v in high.residues(2)) == low.residues(2)
