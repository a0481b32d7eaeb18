"""Constructive zero-sum and small-field solvers.

Everything here works with residues: subset sums modulo q built as sumsets
of {0, c_j} with back-pointers, solvers for unit-coefficient diagonal
equations over F_p when k = p^tau (p - 1) (so x^k is 1 for units), the
non-singular pair solver for one diagonal and one linear equation over
F_p, and the zero-sum step in (Z/3)^2.

Tie-breaking is always smallest index first, then smallest value.
"""

import itertools
import math
from collections.abc import Sequence
from typing import Literal

from beartype import beartype
from klogr import get_logger
from pydantic import ConfigDict
from pydantic.dataclasses import dataclass

from padicsol._errors import InternalError, NotApplicable, PreconditionViolated
from padicsol._types import PadicContext
from padicsol.tools.cache import jaxtyped

logger = get_logger()

FpKind = Literal["solved", "all_equal", "critical_shape", "no_solution"]


@dataclass(config=ConfigDict(extra="forbid", frozen=True), kw_only=True)
class CriticalShape:
    """Coefficient matrix (a, -a, a', ..., a' / b1, b2, 0, ..., 0)."""

    permutation: tuple[int, ...]
    """Input indices in the order of the shape."""
    a: int
    """First header coefficient."""
    a_prime: int
    """Common tail coefficient."""
    b1: int
    """First header linear coefficient."""
    b2: int
    """Second header linear coefficient."""


@dataclass(config=ConfigDict(extra="forbid", frozen=True), kw_only=True)
class FpSolution:
    """A solution over F_p, or the reason there is none."""

    values: tuple[int, ...]
    """One value in [0, p) per input coefficient (extra slot last)."""
    kind: FpKind = "solved"
    """Outcome tag."""
    pivot: tuple[int, int] | None = None
    """0-based index pair with a unit Jacobian minor."""
    shape: CriticalShape | None = None
    """Filled when kind is `critical_shape`."""

    @property
    def solved(self) -> bool:
        """True for kind `solved`."""
        return self.kind == "solved"


@dataclass(config=ConfigDict(extra="forbid", frozen=True), kw_only=True)
class PairChoice:
    """Output of `pair_with_nonzero_sum`."""

    pair: tuple[int, int]
    """0-based indices (i, j) with a_i + a_j a unit."""
    nonzero_pairs: int
    """How many of the three pairs have a unit sum."""
    exceptional: bool
    """True when a_1 = a_2 = -a_3 up to order (exactly one pair)."""


@jaxtyped(typechecker=beartype)
def subset_sum_to(
    values: Sequence[int],
    modulus: int,
    target: int,
    indices: Sequence[int] | None = None,
) -> tuple[int, ...] | None:
    """Smallest-first subset of `indices` whose values sum to `target`.

    The sumset {0, c_j1} + {0, c_j2} + ... is grown one index at a time;
    each new residue remembers the residue it came from, so the subset is
    read back from the pointers. Returns None when `target` is never hit.
    """
    if indices is None:
        indices = range(len(values))
    target %= modulus
    back: dict[int, tuple[int, int] | None] = {0: None}
    if target == 0:
        return ()
    for j in indices:
        c = values[j] % modulus
        for r in sorted(back):
            r2 = (r + c) % modulus
            if r2 in back:
                continue
            back[r2] = (r, j)
            if r2 == target:
                chosen = []
                cur = r2
                while back[cur] is not None:
                    prev, idx = back[cur]  # type: ignore[misc]
                    chosen.append(idx)
                    cur = prev
                return tuple(sorted(chosen))
    return None


@jaxtyped(typechecker=beartype)
def zero_subset_sum(c: Sequence[int], q: int) -> tuple[int, ...]:
    """Index set J containing 0 with sum_{j in J} c_j = 0 mod q.

    Args:
        c (Sequence[int]): At least q units modulo q.
        q (int): The modulus (q >= 2).

    Returns:
        tuple[int, ...]: Sorted 0-based indices, always including 0.

    Raises:
        PreconditionViolated: Fewer than q entries or a non-unit entry.

    """
    if q < 2 or len(c) < q:
        msg = f"need at least q={q} coefficients, got {len(c)}"
        raise PreconditionViolated(msg)
    if any(math.gcd(v, q) != 1 for v in c):
        msg = f"coefficients must be units mod {q}: {list(c)}"
        raise PreconditionViolated(msg)
    rest = subset_sum_to(c, q, -c[0], range(1, len(c)))
    if rest is None:
        msg = f"sumset growth failed to cover Z/{q}: {list(c)}"
        raise InternalError(msg)
    return (0, *rest)


def _nonempty_zero_subset(a: Sequence[int], p: int) -> tuple[int, ...] | None:
    for first in range(len(a)):
        rest = subset_sum_to(a, p, -a[first], range(first + 1, len(a)))
        if rest is not None:
            return (first, *rest)
    return None


@jaxtyped(typechecker=beartype)
def solve_unit_diagonal_mod_p(
    a: Sequence[int], ctx: PadicContext
) -> FpSolution:
    """Solve sum a_j x_j^k = 0 over F_p with unit a_j, nontrivially.

    With at least p coefficients the solution has x_1 = 1. With p - 1
    coefficients either a solution exists or every a_j is the same
    residue (`all_equal`). Shorter inputs are scanned exhaustively.
    """
    ctx.require_tau()
    p = ctx.p
    a = [v % p for v in a]
    if not a or any(v == 0 for v in a):
        msg = f"coefficients must be units mod {p}: {a}"
        raise PreconditionViolated(msg)
    if len(a) >= p:
        support = zero_subset_sum(a, p)
    else:
        support = _nonempty_zero_subset(a, p)
    if support is None:
        if len(a) == p - 1:
            if len(set(a)) != 1:
                msg = f"p-1 coefficients without a solution must agree: {a}"
                raise InternalError(msg)
            return FpSolution(values=(0,) * len(a), kind="all_equal")
        return FpSolution(values=(0,) * len(a), kind="no_solution")
    values = [0] * len(a)
    for j in support:
        values[j] = 1
    return FpSolution(values=tuple(values))


@jaxtyped(typechecker=beartype)
def pair_with_nonzero_sum(a: Sequence[int], p: int) -> PairChoice:
    """Among three units pick a pair with a unit sum.

    Raises:
        PreconditionViolated: Unless exactly three units and p >= 3.

    """
    if p < 3 or len(a) != 3 or any(v % p == 0 for v in a):
        msg = f"need three units mod an odd prime, got {list(a)} mod {p}"
        raise PreconditionViolated(msg)
    pairs = [(0, 1), (0, 2), (1, 2)]
    good = [(i, j) for i, j in pairs if (a[i] + a[j]) % p]
    return PairChoice(
        pair=good[0], nonzero_pairs=len(good), exceptional=len(good) == 1
    )


def pair_residuals(
    a: Sequence[int],
    b: Sequence[int],
    values: Sequence[int],
    ctx: PadicContext,
) -> tuple[int, int]:
    """(A, B) of the F_p pair at `values`, reduced mod p."""
    p, k = ctx.p, ctx.k
    big_a = sum(ai * pow(x, k, p) for ai, x in zip(a, values, strict=True))
    big_b = sum(bi * x for bi, x in zip(b, values, strict=True))
    return big_a % p, big_b % p


def fp_minor(
    a: Sequence[int],
    b: Sequence[int],
    values: Sequence[int],
    pivot: tuple[int, int],
    ctx: PadicContext,
) -> int:
    """b_i a_j x_j^(k-1) - b_j a_i x_i^(k-1) mod p."""
    p, k = ctx.p, ctx.k
    i, j = pivot
    return (
        b[i] * a[j] * pow(values[j], k - 1, p)
        - b[j] * a[i] * pow(values[i], k - 1, p)
    ) % p


def _pair_route(
    a: Sequence[int],
    b: Sequence[int],
    i: int,
    j: int,
    ctx: PadicContext,
) -> FpSolution | None:
    """x_i, x_j units with a_i + a_j + (subset of the rest) = 0.

    The rest is solved by the zero-subset lemma applied to
    (a_i + a_j, rest...); then x_i fixes B != 0 and x_j closes B; finally
    (x_i, x_j) slides along the linear relation until the minor is a unit.
    """
    p, k = ctx.p, ctx.k
    rest = [m for m in range(len(a)) if m not in (i, j)]
    support = zero_subset_sum([a[i] + a[j]] + [a[m] for m in rest], p)
    values = [0] * len(a)
    for pos in support[1:]:
        values[rest[pos - 1]] = 1
    big_b = sum(b[m] * values[m] for m in rest) % p
    x_i = next(x for x in range(1, p) if (b[i] * x + big_b) % p)
    x_j = -(b[i] * x_i + big_b) * pow(b[j], -1, p) % p
    for y in range(p):
        z_i = (x_i + b[j] * y) % p
        z_j = (x_j - b[i] * y) % p
        if z_i == 0 or z_j == 0:
            continue
        values[i], values[j] = z_i, z_j
        minor = (
            b[i] * a[j] * pow(z_j, k - 1, p) - b[j] * a[i] * pow(z_i, k - 1, p)
        ) % p
        if minor:
            return FpSolution(values=tuple(values), pivot=(i, j))
    return None


def _fp_exhaustive(
    a: Sequence[int], b: Sequence[int], ctx: PadicContext
) -> FpSolution | None:
    p = ctx.p
    for values in itertools.product(range(p), repeat=len(a)):
        if pair_residuals(a, b, values, ctx) != (0, 0):
            continue
        for i, j in itertools.combinations(range(len(a)), 2):
            if fp_minor(a, b, values, (i, j), ctx):
                return FpSolution(values=tuple(values), pivot=(i, j))
    return None


def check_fp_solution(
    a: Sequence[int],
    b: Sequence[int],
    sol: FpSolution,
    ctx: PadicContext,
) -> bool:
    """Re-evaluate a solved F_p pair: both equations and the minor."""
    if not sol.solved or sol.pivot is None:
        return False
    if pair_residuals(a, b, sol.values, ctx) != (0, 0):
        return False
    return fp_minor(a, b, sol.values, sol.pivot, ctx) != 0


@jaxtyped(typechecker=beartype)
def solve_unit_pair_mod_p(
    a: Sequence[int],
    b: Sequence[int],
    ctx: PadicContext,
    free_slot: int | None = None,
) -> FpSolution:
    """Non-singular solution over F_p of sum a_j x_j^k = sum b_j x_j = 0.

    Args:
        a (Sequence[int]): Unit coefficients of the diagonal equation.
        b (Sequence[int]): Linear coefficients (any residues).
        ctx (PadicContext): Frame with k = p^tau (p - 1), p >= 5.
        free_slot (int | None): Unit coefficient c of an extra variable y
            that appears in the linear equation only; its value is
            appended to `values`.

    Returns:
        FpSolution: `solved` with a pivot, or `critical_shape` when exactly
            p + 1 coefficients have the obstructed shape.

    Raises:
        NotApplicable: Outside the hypotheses (p < 5, too few variables,
            all b zero without a free slot).

    """
    ctx.require_tau()
    p = ctx.p
    if p < 5:
        msg = f"the pair solver needs p >= 5, got p={p}"
        raise NotApplicable(msg)
    if len(a) != len(b):
        msg = "a and b must have the same length"
        raise NotApplicable(msg)
    a = [v % p for v in a]
    b = [v % p for v in b]
    if any(v == 0 for v in a):
        msg = f"diagonal coefficients must be units mod {p}"
        raise NotApplicable(msg)
    n = len(a)
    if free_slot is not None:
        c = free_slot % p
        if c == 0 or n < p:
            msg = "free slot needs a unit coefficient and p variables"
            raise NotApplicable(msg)
        support = zero_subset_sum(a, p)
        values = [0] * n
        for j in support:
            values[j] = 1
        y = -sum(bj * x for bj, x in zip(b, values, strict=True)) * pow(
            c, -1, p
        ) % p
        return FpSolution(values=(*values, y), pivot=(0, n))
    if n < p + 1:
        msg = f"need at least p+1={p + 1} unit coefficients, got {n}"
        raise NotApplicable(msg)
    nonzero = [j for j in range(n) if b[j]]
    if not nonzero:
        msg = "some linear coefficient must be a unit"
        raise NotApplicable(msg)
    sol: FpSolution | None = None
    if len(nonzero) >= 3:
        choice = pair_with_nonzero_sum([a[j] for j in nonzero[:3]], p)
        i, j = (nonzero[m] for m in choice.pair)
        sol = _pair_route(a, b, i, j, ctx)
    elif len(nonzero) == 2:
        i, j = nonzero
        if (a[i] + a[j]) % p:
            sol = _pair_route(a, b, i, j, ctx)
        else:
            rest = [m for m in range(n) if m not in (i, j)]
            inner = solve_unit_diagonal_mod_p([a[m] for m in rest], ctx)
            if not inner.solved:
                return FpSolution(
                    values=(0,) * n,
                    kind="critical_shape",
                    shape=CriticalShape(
                        permutation=(i, j, *rest),
                        a=a[i],
                        a_prime=a[rest[0]],
                        b1=b[i],
                        b2=b[j],
                    ),
                )
            values = [0] * n
            for pos, m in enumerate(rest):
                values[m] = inner.values[pos]
            unit = next(m for m in rest if values[m])
            sol = FpSolution(values=tuple(values), pivot=(min(i, unit), max(i, unit)))
    else:
        (i,) = nonzero
        rest = [m for m in range(n) if m != i]
        support = zero_subset_sum([a[m] for m in rest], p)
        values = [0] * n
        for pos in support:
            values[rest[pos]] = 1
        sol = FpSolution(
            values=tuple(values),
            pivot=(min(i, rest[0]), max(i, rest[0])),
        )
    if sol is not None and check_fp_solution(a, b, sol, ctx):
        return sol
    logger.warning(f"pair route failed its check on a={a}, b={b}; scanning")
    if p <= 7 and n <= 12:
        found = _fp_exhaustive(a, b, ctx)
        if found is not None:
            return found
    msg = f"no non-singular F_{p} solution built for a={a}, b={b}"
    raise InternalError(msg)


@jaxtyped(typechecker=beartype)
def olson_zero_sum(pairs: Sequence[tuple[int, int]]) -> tuple[int, ...]:
    """Nonempty J with sum a_j = sum b_j = 0 mod 3.

    Any five elements of (Z/3)^2 contain such a J, so the search only
    fails on a bug.

    Raises:
        PreconditionViolated: Fewer than five pairs.
        InternalError: No zero-sum subset found.

    """
    if len(pairs) < 5:
        msg = f"need at least five pairs, got {len(pairs)}"
        raise PreconditionViolated(msg)
    pts = [(x % 3, y % 3) for x, y in pairs]
    for first in range(len(pts)):
        target = ((-pts[first][0]) % 3, (-pts[first][1]) % 3)
        if target == (0, 0):
            return (first,)
        back: dict[tuple[int, int], tuple[tuple[int, int], int] | None] = {
            (0, 0): None
        }
        for j in range(first + 1, len(pts)):
            for r in sorted(back):
                r2 = ((r[0] + pts[j][0]) % 3, (r[1] + pts[j][1]) % 3)
                if r2 in back:
                    continue
                back[r2] = (r, j)
                if r2 == target:
                    chosen = [first]
                    cur = r2
                    while back[cur] is not None:
                        prev, idx = back[cur]  # type: ignore[misc]
                        chosen.append(idx)
                        cur = prev
                    return tuple(sorted(chosen))
    msg = f"no zero-sum subset among {pts}"
    raise InternalError(msg)
