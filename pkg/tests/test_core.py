"""Valuations, system statistics, transform steps and transcripts."""

from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest

from padicsol import DiagLinSystem, PadicContext, Transcript
from padicsol._errors import (
    ContextNotApplicable,
    InvalidInput,
    InvalidTransform,
)
from padicsol._types import INF, SystemType
from padicsol.core import (
    apply_transform,
    find_unit_minor,
    kth_power_residue,
    make_step,
    permutation_step,
    scaling_step,
    selection_step,
    stats,
    unit_part,
    vp,
    vp_rational,
)


def test_vp_exact_and_zero() -> None:
    assert vp(0, 5) == INF
    assert vp(250, 5) == 3
    assert vp(-8, 2) == 3
    assert vp(7, 5) == 0
    assert vp(3 * 5**40, 5) == 40


def test_vp_rational_and_unit_part() -> None:
    assert vp_rational(Fraction(25, 4), 2) == -2
    assert vp_rational(Fraction(25, 4), 5) == 2
    assert vp_rational(0, 3) == INF
    assert unit_part(250, 5) == 2
    with pytest.raises(ValueError, match="zero"):
        unit_part(0, 5)


def test_context_exponents() -> None:
    ctx = PadicContext.of(5, 4)
    assert (ctx.tau, ctx.gamma, ctx.modulus) == (0, 1, 5)
    ctx = PadicContext.of(2, 4)
    assert (ctx.tau, ctx.gamma, ctx.modulus) == (2, 4, 16)
    ctx = PadicContext.of(3, 6)
    assert (ctx.tau, ctx.gamma, ctx.vpk) == (1, 2, 1)
    assert ctx.newton_exponent == 3


def test_context_without_tau() -> None:
    ctx = PadicContext.of(5, 6)
    assert not ctx.has_tau
    assert (ctx.d, ctx.k0, ctx.vpk) == (2, 3, 0)
    with pytest.raises(ContextNotApplicable):
        ctx.require_tau()


@pytest.mark.parametrize(("p", "k"), [(4, 4), (1, 4), (5, 3)])
def test_context_rejects_bad_frames(p: int, k: int) -> None:
    with pytest.raises(InvalidInput):
        PadicContext.of(p, k)


def test_unit_power_collapse(ctx_p3: PadicContext) -> None:
    assert [kth_power_residue(x, ctx_p3) for x in range(9)] == [
        0,
        1,
        1,
        0,
        1,
        1,
        0,
        1,
        1,
    ]


@pytest.mark.parametrize(
    ("p", "k"), [(2, 4), (2, 8), (3, 6), (3, 18), (5, 4), (7, 6), (11, 10)]
)
def test_unit_power_collapse_on_random_points(
    p: int, k: int, seeded: int
) -> None:
    ctx = PadicContext.of(p, k)
    rng = np.random.default_rng(seeded)
    for raw in rng.integers(-(10**6), 10**6, size=200):
        x = int(raw)
        expected = 0 if x % p == 0 else 1
        assert kth_power_residue(x, ctx) == expected
        assert pow(x, k, ctx.modulus) == expected


def test_stats_levels_and_type(ctx_p5: PadicContext) -> None:
    system = DiagLinSystem.of([1, 5, 25, 0], [0, 1, 5, 1])
    st = stats(system, ctx_p5)
    assert st.nu == (0, 1, 2, INF)
    assert st.mu == (INF, 0, 1, 0)
    assert st.upsilon == (1, 1, 1, 0)
    assert st.levels == (0, 0, 1, 0)
    assert st.low_flags == (False, True, True, True)
    assert st.type == SystemType.B
    assert st.block(1, 4) == (1,)
    assert st.at_level(0) == (0, 1, 3)


def test_type_a_when_non_units_sit_outside_the_linear_form(
    ctx_p5: PadicContext,
) -> None:
    system = DiagLinSystem.of([1, 5, 25], [1, 5, 0])
    assert stats(system, ctx_p5).type == SystemType.A


def test_all_unit_systems_are_type_a(ctx_p5: PadicContext) -> None:
    system = DiagLinSystem.of([1, -1], [1, -1])
    assert stats(system, ctx_p5).type == SystemType.A
    assert stats(system, ctx_p5).levels == (0, 0)


def test_system_validation_and_fingerprint() -> None:
    with pytest.raises(ValueError, match="differ in length"):
        DiagLinSystem.of([1, 2], [1])
    with pytest.raises(ValueError, match="at least one variable"):
        DiagLinSystem.of([], [])
    one = DiagLinSystem.of([1, 2], [3, 4])
    two = DiagLinSystem.of((1, 2), (3, 4))
    assert one == two
    assert one.fingerprint == two.fingerprint
    assert one.fingerprint != DiagLinSystem.of([2, 1], [3, 4]).fingerprint


def test_scaling_and_pull_back() -> None:
    system = DiagLinSystem.of([1, -1, 2], [1, 1, 0])
    transcript = Transcript.start(system, 4).then(scaling_step([2, 1, 1]))
    assert transcript.system == DiagLinSystem.of([16, -1, 2], [2, 1, 0])
    x = transcript.pull_back([1, 1, 1])
    assert x == (2, 1, 1)
    assert system.form_values(x, 4) == transcript.system.form_values(
        [1, 1, 1], 4
    )


def test_selection_map_and_image() -> None:
    system = DiagLinSystem.of([1, 2, 3], [1, 0, 1])
    transcript = Transcript.start(system, 4).then(selection_step([2, 0], 3))
    assert transcript.system == DiagLinSystem.of([3, 1], [1, 1])
    assert transcript.composite_map() == (
        (1, Fraction(1)),
        None,
        (0, Fraction(1)),
    )
    assert transcript.image() == frozenset({0, 1})
    assert transcript.pull_back([5, 7]) == (7, 0, 5)


def test_step_rejects_zero_multiplier_and_scale() -> None:
    with pytest.raises(InvalidTransform, match="zero multiplier"):
        make_step([0, 1], [0, 1])
    with pytest.raises(InvalidTransform, match="scale"):
        make_step([0, 1], scale_a=0)
    with pytest.raises(InvalidTransform, match="not a permutation"):
        permutation_step([0, 0])


def test_non_integral_step_is_rejected() -> None:
    system = DiagLinSystem.of([1, 1], [1, 1])
    with pytest.raises(InvalidTransform, match="not integral"):
        Transcript.start(system, 4).then(scaling_step([Fraction(1, 2), 1]))


def test_honest_replay_drops_offsets() -> None:
    system = DiagLinSystem.of([1, 0], [1, 1])
    transcript = Transcript.start(system, 4).then(
        make_step([0, 1], offsets_a=[0, 5**5], label="perturb")
    )
    assert transcript.perturbed
    assert transcript.system.a == (1, 5**5)
    assert transcript.replay(honest=True).a == (1, 0)
    assert transcript.replay() == transcript.system


def test_find_unit_minor() -> None:
    system = DiagLinSystem.of([1, 1, 1], [1, -1, 0])
    assert find_unit_minor(system, [1, 1, 0], 4, 5) == (0, 1)
    same = DiagLinSystem.of([1, 1], [1, 1])
    assert find_unit_minor(same, [1, 1], 4, 5) is None


def test_apply_transform_checks_sizes() -> None:
    system = DiagLinSystem.of([1, -1, 2], [1, 1, 0])
    step = scaling_step([2, 1, 1])
    assert apply_transform(system, step, 4) == DiagLinSystem.of(
        [16, -1, 2], [2, 1, 0]
    )
    with pytest.raises(InvalidTransform, match="expects 3 variables"):
        apply_transform(DiagLinSystem.of([1, 1], [1, 1]), step, 4)


def _random_chain(
    system: DiagLinSystem, rng: np.random.Generator, length: int
) -> Transcript:
    transcript = Transcript.start(system, 4)
    for _ in range(length):
        s = transcript.system.s
        choice = int(rng.integers(0, 3))
        if choice == 0:
            mults = [int(v) for v in rng.integers(1, 4, size=s)]
            transcript = transcript.then(scaling_step(mults))
        elif choice == 1:
            order = [int(i) for i in rng.permutation(s)]
            transcript = transcript.then(permutation_step(order))
        elif s > 2:
            drawn = rng.choice(s, size=s - 1, replace=False)
            keep = sorted(int(i) for i in drawn)
            transcript = transcript.then(selection_step(keep, s))
    return transcript


def test_pull_back_preserves_form_values(seeded: int) -> None:
    rng = np.random.default_rng(seeded)
    for _ in range(50):
        s = int(rng.integers(3, 8))
        system = DiagLinSystem.of(
            rng.integers(-20, 21, size=s), rng.integers(-20, 21, size=s)
        )
        transcript = _random_chain(system, rng, int(rng.integers(1, 6)))
        y = [int(v) for v in rng.integers(-5, 6, size=transcript.system.s)]
        x = transcript.pull_back(y)
        assert system.form_values(x, 4) == transcript.system.form_values(y, 4)


def test_pull_back_maps_solutions_to_solutions() -> None:
    system = DiagLinSystem.of([1, 3, -1, 7], [1, 5, -1, 2])
    transcript = (
        Transcript.start(system, 4)
        .then(permutation_step([2, 0, 3, 1]))
        .then(scaling_step([1, 2, 1, 1]))
        .then(selection_step([0, 1], 4))
    )
    assert transcript.system == DiagLinSystem.of([-1, 16], [-1, 2])
    x = transcript.pull_back([2, 1])
    assert x == (2, 0, 2, 0)
    assert transcript.system.form_values([2, 1], 4) == (0, 0)
    assert system.form_values(x, 4) == (0, 0)


def test_stats_follow_a_permutation(seeded: int) -> None:
    ctx = PadicContext.of(5, 4)
    rng = np.random.default_rng(seeded)
    for _ in range(30):
        s = int(rng.integers(2, 10))
        levels = rng.integers(0, 4, size=(2, s))
        units = rng.integers(1, 5, size=(2, s))
        a, b = (
            [
                int(u) * 5 ** int(v)
                for u, v in zip(units[j], levels[j], strict=True)
            ]
            for j in (0, 1)
        )
        system = DiagLinSystem.of(a, b)
        order = [int(i) for i in rng.permutation(s)]
        step = permutation_step(order)
        permuted = Transcript.start(system, 4).then(step).system
        before, after = stats(system, ctx), stats(permuted, ctx)
        assert after.nu == tuple(before.nu[i] for i in order)
        assert after.mu == tuple(before.mu[i] for i in order)
        assert after.upsilon == before.upsilon
        assert after.type == before.type
