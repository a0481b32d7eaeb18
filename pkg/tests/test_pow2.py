"""Contraction classes, the cycling transform and the p = 2 engine."""

from __future__ import annotations

import numpy as np
import pytest

from padicsol import DiagLinSystem, EngineTag, PadicContext, Transcript
from padicsol._errors import NeedsCycling, NotApplicable, RuleViolation
from padicsol.core import vp
from padicsol.engines.base import check_payload
from padicsol.engines.pow2 import (
    ContractionClass,
    ContractionState,
    contract_even_block,
    contract_seeded,
    cycle,
    cycling_solve,
    drop,
    initial_state,
    merge,
    needs_cycling,
    realize,
    schedule,
    search_zero_one,
    solve_pow2,
)
from padicsol.normalize import is_conditioned


def test_initial_state(ctx_p2: PadicContext) -> None:
    system = DiagLinSystem.of([1, 2, 8, 0], [1, 0, 1, 0])
    state = initial_state(system, ctx_p2)
    assert state.target == 4
    assert [c.tag for c in state.classes] == ["P0o", "S1e", "S3o", "Sinfe"]
    assert state.covers()
    assert state.goal is None


def test_initial_state_needs_p2(ctx_p5: PadicContext) -> None:
    with pytest.raises(NotApplicable):
        initial_state(DiagLinSystem.of([1, 1], [1, 1]), ctx_p5)


def test_merge_checks_its_gain(ctx_p2: PadicContext) -> None:
    state = initial_state(DiagLinSystem.of([2, 2, 1], [0, 0, 1]), ctx_p2)
    first, second, _ = state.classes
    merged = merge(state, first, second, rule="3S", at_least=2, exact=True)
    new = merged.classes[-1]
    assert (new.c, new.niveau, new.tag) == (4, 2, "S2e")
    assert new.members == (0, 1)
    assert new.provenance == "3S[x0, x1]"
    with pytest.raises(RuleViolation):
        merge(state, first, second, rule="3S", at_least=3)


def test_drop_records_odd_witness(ctx_p2: PadicContext) -> None:
    state = initial_state(DiagLinSystem.of([2, 2, 1], [0, 0, 1]), ctx_p2)
    dropped = drop(state, state.classes[2])
    assert dropped.zeroed == frozenset({2})
    assert dropped.odd_zeroed_witness == 2
    assert dropped.covers()
    assert len(dropped.select(niveau=1)) == 2


def test_cycling_transform(
    ctx_p2: PadicContext, cycling_system: DiagLinSystem
) -> None:
    assert needs_cycling(cycling_system, ctx_p2)
    cycled = cycle(Transcript.start(cycling_system, 4), ctx_p2)
    assert cycled.system.a == (2,) * 15 + (1,) * 3
    assert cycled.system.b == cycling_system.b


def test_cycling_solve(
    ctx_p2: PadicContext, cycling_system: DiagLinSystem
) -> None:
    result = cycling_solve(Transcript.start(cycling_system, 4), ctx_p2)
    assert result.route == "cycling"
    assert result.hensel is not None
    assert result.hensel.pivot == (15, 17)
    ones = {*range(7), 15, 16}
    assert result.hensel.x == tuple(
        1 if i in ones else 0 for i in range(18)
    )
    assert check_payload(result, result.transcript.system)


def test_cycling_is_not_needed_for_type_a(ctx_p2: PadicContext) -> None:
    system = DiagLinSystem.of([1] * 15 + [8] * 3, [1] * 15 + [0] * 3)
    assert not needs_cycling(system, ctx_p2)
    with pytest.raises(NotApplicable):
        cycling_solve(Transcript.start(system, 4), ctx_p2)


def test_search_zero_one(ctx_p2: PadicContext) -> None:
    system = DiagLinSystem.of([1] * 16, [0] * 16)
    assert search_zero_one(system, ctx_p2) == [1] * 16
    assert search_zero_one(system, ctx_p2, exclude=[0]) is None


def test_solve_pow2_type_a(ctx_p2: PadicContext) -> None:
    system = DiagLinSystem.of([1] * 18, [1] + [0] * 17)
    result = solve_pow2(Transcript.start(system, 4), ctx_p2)
    assert result.resolved
    assert result.engine == EngineTag.POW2
    assert check_payload(result, system)


def test_solve_pow2_frame(ctx_p2: PadicContext) -> None:
    system = DiagLinSystem.of([1] * 17, [1] * 17)
    result = solve_pow2(Transcript.start(system, 4), ctx_p2)
    assert not result.resolved
    assert result.route == "frame"


def test_schedule_hands_odd_tops_to_cycling(
    ctx_p2: PadicContext, cycling_system: DiagLinSystem
) -> None:
    with pytest.raises(NeedsCycling, match="odd classes at niveau 3"):
        schedule(initial_state(cycling_system, ctx_p2))
    result = solve_pow2(Transcript.start(cycling_system, 4), ctx_p2)
    assert result.route == "cycling"
    assert check_payload(result, cycling_system)


def _wide_level_zero(k: int, kind: str) -> DiagLinSystem:
    s = k * k + 2
    if kind == "A":
        return DiagLinSystem.of([1] * s, [1] + [0] * (s - 1))
    return DiagLinSystem.of([1] * (s - 2) + [2, 2], [0] * (s - 2) + [1, 1])


@pytest.mark.parametrize(
    ("k", "kind"),
    [(8, "A"), (8, "B"), (16, "A"), (16, "B"), (32, "A")],
)
def test_schedule_reaches_the_target_niveau(k: int, kind: str) -> None:
    ctx = PadicContext.of(2, k)
    system = _wide_level_zero(k, kind)
    state = schedule(initial_state(system, ctx))
    goal = state.goal
    assert goal is not None
    assert goal.niveau >= state.target
    assert state.covers()
    point = realize(state)
    assert sum(a * x for a, x in zip(system.a, point, strict=True)) % (
        2**state.target
    ) == 0
    assert sum(b * x for b, x in zip(system.b, point, strict=True)) % 2 == 0


@pytest.mark.parametrize("kind", ["A", "B"])
def test_solve_pow2_octic(kind: str) -> None:
    ctx = PadicContext.of(2, 8)
    system = _wide_level_zero(8, kind)
    result = solve_pow2(Transcript.start(system, 8), ctx)
    assert result.resolved
    assert result.route == f"type-{kind}"
    assert check_payload(result, system)


@pytest.mark.slow
def test_merges_keep_their_promised_gain(
    ctx_p2: PadicContext, seeded: int
) -> None:
    rng = np.random.default_rng(seeded)
    merges = 0
    while merges < 10_000:
        s = int(rng.integers(4, 19))
        levels = rng.integers(0, 5, size=s)
        odd = 2 * rng.integers(-8, 8, size=s) + 1
        system = DiagLinSystem.of(
            [int(u) << int(v) for u, v in zip(odd, levels, strict=True)],
            rng.integers(0, 4, size=s),
        )
        state = initial_state(system, ctx_p2)
        while len(state.classes) >= 2:
            i, j = rng.choice(len(state.classes), size=2, replace=False)
            x, y = state.classes[int(i)], state.classes[int(j)]
            total = x.c + y.c
            if total:
                niveau = int(vp(total, 2))
                with pytest.raises(RuleViolation):
                    merge(state, x, y, rule="R", at_least=niveau + 1)
            else:
                niveau = int(rng.integers(0, 10))
            even = (x.d + y.d) % 2 == 0
            state = merge(
                state,
                x,
                y,
                rule="R",
                at_least=niveau,
                exact=bool(total),
                even=even,
            )
            new = state.classes[-1]
            assert (new.c, new.d) == (total, x.d + y.d)
            assert new.primary == (x.primary or y.primary)
            assert state.covers()
            merges += 1


def _conditioned_quartic(rng: np.random.Generator) -> DiagLinSystem:
    levels = rng.integers(0, 4, size=18)
    odd = 2 * rng.integers(0, 8, size=(2, 18)) + 1
    a = [int(u) << int(v) for u, v in zip(odd[0], levels, strict=True)]
    b = [
        int(u) * int(rng.choice([0, 1, 2])) if v else int(u)
        for u, v in zip(odd[1], levels, strict=True)
    ]
    return DiagLinSystem.of(a, b)


@pytest.mark.slow
def test_conditioned_quartic_systems_resolve(
    ctx_p2: PadicContext, seeded: int
) -> None:
    rng = np.random.default_rng(seeded)
    solved = 0
    for _ in range(300):
        system = _conditioned_quartic(rng)
        if not is_conditioned(system, ctx_p2):
            continue
        result = solve_pow2(Transcript.start(system, 4), ctx_p2)
        assert result.resolved, system
        assert check_payload(result, system)
        solved += 1
    assert solved > 0


def _block_state(
    ctx: PadicContext,
    rng: np.random.Generator,
    nu: int,
    prim_count: int,
    sec_niveaux: list[int],
) -> tuple[ContractionState, list[ContractionClass]]:
    """Even primaries at niveau >= nu (two odd variables each) plus even
    secondaries at the given niveaux."""
    a: list[int] = []
    prim_niveaux = [int(rng.integers(nu, nu + 3)) for _ in range(prim_count)]
    for n in prim_niveaux:
        t = 2 * int(rng.integers(-4, 4)) + 1
        a.extend([1, 2**n * t - 1])
    a.extend((2 * int(rng.integers(-4, 4)) + 1) << n for n in sec_niveaux)
    b = [2 * int(rng.integers(0, 3)) for _ in a]
    state = initial_state(DiagLinSystem.of(a, b), ctx)
    single = {c.members[0]: c for c in state.classes}
    classes: list[ContractionClass] = []
    for m, n in enumerate(prim_niveaux):
        x, y = single[2 * m], single[2 * m + 1]
        state = merge(state, x, y, rule="2P0", at_least=n, exact=True)
        classes.append(state.classes[-1])
    classes.extend(single[i] for i in range(2 * prim_count, len(a)))
    return state, classes


def _check_block_result(
    state: ContractionState, new: ContractionClass, niveau: int
) -> None:
    assert new in state.classes
    assert new.primary
    assert new.even
    assert new.niveau >= niveau
    assert new.c == sum(state.system.a[i] for i in new.members)
    assert state.covers()


def test_even_block_contraction(ctx_p2: PadicContext, seeded: int) -> None:
    rng = np.random.default_rng(seeded)
    for _ in range(100):
        nu, l = int(rng.integers(1, 4)), int(rng.integers(1, 5))  # noqa: E741
        prim_count = int(rng.integers(1, 2**l + 1))
        state, classes = _block_state(
            ctx_p2, rng, nu, prim_count, [nu] * (2**l - prim_count)
        )
        state, new = contract_even_block(state, classes, nu, l)
        _check_block_result(state, new, nu + l)


def test_seeded_contraction(ctx_p2: PadicContext, seeded: int) -> None:
    rng = np.random.default_rng(seeded)
    for _ in range(100):
        nu, l = int(rng.integers(1, 4)), int(rng.integers(0, 4))  # noqa: E741
        prim_count = int(rng.integers(2**l, 2 ** (l + 1) + 1))
        sec_niveaux = [
            int(rng.integers(nu, nu + l + 1))
            for _ in range(2 ** (l + 1) - prim_count)
        ]
        state, classes = _block_state(
            ctx_p2, rng, nu, prim_count, sec_niveaux
        )
        state, new = contract_seeded(state, classes, nu, l)
        _check_block_result(state, new, nu + l + 1)
