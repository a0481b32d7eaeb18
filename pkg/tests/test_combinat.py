"""Subset sums, F_p solvers and the zero-sum step in (Z/3)^2."""

from __future__ import annotations

import itertools

import pytest

from padicsol import PadicContext
from padicsol._errors import NotApplicable, PreconditionViolated
from padicsol.combinat import (
    check_fp_solution,
    olson_zero_sum,
    pair_with_nonzero_sum,
    solve_unit_diagonal_mod_p,
    solve_unit_pair_mod_p,
    subset_sum_to,
    zero_subset_sum,
)


def test_subset_sum_smallest_index_first() -> None:
    assert subset_sum_to([3, 4, 5], 7, 0) == ()
    assert subset_sum_to([1, 2, 4], 8, 6) == (1, 2)
    assert subset_sum_to([2, 2], 4, 1) is None


def test_zero_subset_sum_contains_first_index() -> None:
    assert zero_subset_sum([1] * 5, 5) == (0, 1, 2, 3, 4)
    support = zero_subset_sum([3, 1, 4, 1, 5, 2, 6], 7)
    assert support[0] == 0
    assert sum([3, 1, 4, 1, 5, 2, 6][j] for j in support) % 7 == 0


def test_zero_subset_sum_preconditions() -> None:
    with pytest.raises(PreconditionViolated, match="at least"):
        zero_subset_sum([1, 1, 1], 5)
    with pytest.raises(PreconditionViolated, match="units"):
        zero_subset_sum([1, 1, 1, 1, 5], 5)


def test_unit_diagonal_all_equal(ctx_p5: PadicContext) -> None:
    sol = solve_unit_diagonal_mod_p([1, 1, 1, 1], ctx_p5)
    assert sol.kind == "all_equal"
    assert not sol.solved


def test_unit_diagonal_solved(ctx_p5: PadicContext) -> None:
    sol = solve_unit_diagonal_mod_p([1, 2, 3, 4], ctx_p5)
    assert sol.solved
    assert sol.values == (1, 0, 0, 1)


def test_pair_with_nonzero_sum_exceptional() -> None:
    choice = pair_with_nonzero_sum([1, 1, -1], 5)
    assert choice.pair == (0, 1)
    assert choice.nonzero_pairs == 1
    assert choice.exceptional
    assert not pair_with_nonzero_sum([1, 2, 3], 7).exceptional


def test_unit_pair_solver(ctx_p5: PadicContext) -> None:
    a = [1] * 6
    b = [1, 2, 0, 0, 0, 0]
    sol = solve_unit_pair_mod_p(a, b, ctx_p5)
    assert sol.values == (1, 2, 1, 1, 1, 0)
    assert sol.pivot == (0, 1)
    assert check_fp_solution(a, b, sol, ctx_p5)


def test_unit_pair_solver_free_slot(ctx_p5: PadicContext) -> None:
    a = [1] * 5
    b = [1, 0, 0, 0, 0]
    sol = solve_unit_pair_mod_p(a, b, ctx_p5, free_slot=2)
    assert sol.values[:5] == (1, 1, 1, 1, 1)
    # 1 + 2 y = 0 mod 5
    assert sol.values[5] == 2
    assert sol.pivot == (0, 5)


def test_unit_pair_solver_critical_shape(ctx_p5: PadicContext) -> None:
    sol = solve_unit_pair_mod_p([1, -1, 1, 1, 1, 1], [1, 1, 0, 0, 0, 0], ctx_p5)
    assert sol.kind == "critical_shape"
    assert sol.shape is not None
    assert sol.shape.permutation == (0, 1, 2, 3, 4, 5)
    assert (sol.shape.a, sol.shape.a_prime) == (1, 1)


def test_unit_pair_solver_needs_large_p(ctx_p3: PadicContext) -> None:
    with pytest.raises(NotApplicable, match="p >= 5"):
        solve_unit_pair_mod_p([1] * 8, [1] * 8, ctx_p3)


def test_olson_zero_sum() -> None:
    for pairs in itertools.product([(1, 0), (0, 1), (1, 1), (2, 1)], repeat=5):
        support = olson_zero_sum(list(pairs))
        assert support
        assert sum(pairs[j][0] for j in support) % 3 == 0
        assert sum(pairs[j][1] for j in support) % 3 == 0
    with pytest.raises(PreconditionViolated):
        olson_zero_sum([(1, 0)] * 4)
