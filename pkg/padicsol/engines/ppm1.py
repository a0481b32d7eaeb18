"""The k = p (p - 1) engine for odd p.

Here gamma = 2, so a non-singular solution is needed modulo p^2 for the
diagonal congruence and modulo p for the linear one. Unit k-th powers are
1 modulo p^2, which turns every step into a subset-sum problem.

Both system types start from the variables with v_p(a) = 0 (the x's) and
v_p(a) = 1 (the y's, entering the diagonal congruence as p c_j y_j^k). All
other variables stay zero.
"""

from collections.abc import Sequence

from beartype import beartype
from klogr import get_logger
from pydantic import ConfigDict
from pydantic.dataclasses import dataclass

from padicsol._errors import InternalError, NotApplicable, PreconditionViolated
from padicsol._types import EngineTag, PadicContext, SystemType
from padicsol.combinat import (
    FpSolution,
    olson_zero_sum,
    pair_with_nonzero_sum,
    solve_unit_diagonal_mod_p,
    solve_unit_pair_mod_p,
    subset_sum_to,
    zero_subset_sum,
)
from padicsol.core import DiagLinSystem, Transcript, stats
from padicsol.engines.base import EngineResult, unresolved, witness_at
from padicsol.tools.cache import jaxtyped

logger = get_logger()

SEXTIC_X = 9
SEXTIC_Y = 3


@dataclass(config=ConfigDict(extra="forbid", frozen=True), kw_only=True)
class ModP2Instance:
    """c_1 x_1^k + ... + c_u x_u^k = 0 mod p^2, d_1 x_1 + ... + d_t x_t = 0
    mod p.
    """

    c: tuple[int, ...]
    """Diagonal coefficients, units mod p."""
    d: tuple[int, ...]
    """Linear coefficients of the first t variables, units mod p."""
    ctx: PadicContext
    """Frame with k = p (p - 1)."""

    @property
    def u(self) -> int:
        """Number of variables."""
        return len(self.c)

    @property
    def t(self) -> int:
        """Number of variables in the linear congruence."""
        return len(self.d)


def _check_frame(ctx: PadicContext, system: DiagLinSystem) -> None:
    p, k = ctx.p, ctx.k
    if p < 3 or k != p * (p - 1):
        msg = f"the k = p(p - 1) engine needs odd p, got p={p}, k={k}"
        raise NotApplicable(msg)
    if system.s < k * k + 2:
        msg = f"need s >= k^2 + 2 = {k * k + 2}, got {system.s}"
        raise NotApplicable(msg)


def _check_mod_p2(inst: ModP2Instance) -> None:
    p = inst.ctx.p
    q = p * p
    if not 1 <= inst.t <= inst.u:
        msg = f"need 1 <= t <= u, got t={inst.t}, u={inst.u}"
        raise PreconditionViolated(msg)
    if inst.u < q + 2:
        msg = f"need u >= p^2 + 2 = {q + 2} variables, got {inst.u}"
        raise PreconditionViolated(msg)
    if any(v % p == 0 for v in (*inst.c, *inst.d)):
        msg = f"coefficients must be units mod {p}"
        raise PreconditionViolated(msg)


def _mod_p2_holds(inst: ModP2Instance, sol: FpSolution) -> bool:
    p, k = inst.ctx.p, inst.ctx.k
    q = p * p
    x = sol.values
    big_a = sum(c * pow(v, k, q) for c, v in zip(inst.c, x, strict=True))
    big_b = sum(d * v for d, v in zip(inst.d, x, strict=False))
    if big_a % q or big_b % p or sol.pivot is None:
        return False
    i, j = sol.pivot
    b_i = inst.d[i] if i < inst.t else 0
    b_j = inst.d[j] if j < inst.t else 0
    minor = b_i * inst.c[j] * pow(x[j], k - 1, p) - b_j * inst.c[i] * pow(
        x[i], k - 1, p
    )
    return minor % p != 0


@jaxtyped(typechecker=beartype)
def solve_mod_p2(inst: ModP2Instance) -> FpSolution:
    """Non-singular solution of the pair modulo (p^2, p).

    With t <= 2 a zero subset sum modulo p^2 among indices 2 .. p^2 + 1
    solves both congruences at once (the linear one never sees it) and
    x_0 = 0 pivots against it. With t >= 3 two of the first three indices
    with a unit sum (i, j) are fixed to units, the third is zeroed and
    pivots; the subset sum among 3 .. p^2 + 1 balances c_i + c_j and
    (x_i, x_j) absorb the linear congruence.

    Raises:
        PreconditionViolated: t > u, u < p^2 + 2 or a non-unit coefficient.
        InternalError: The constructed point fails direct evaluation.

    """
    _check_mod_p2(inst)
    p = inst.ctx.p
    q = p * p
    c, d, t = inst.c, inst.d, inst.t
    values = [0] * inst.u
    if t <= 2:
        support = zero_subset_sum(c[2 : q + 2], q)
        for m in support:
            values[m + 2] = 1
        pivot = (0, support[0] + 2)
    else:
        choice = pair_with_nonzero_sum(c[:3], p)
        i, j = choice.pair
        (rest,) = (m for m in range(3) if m not in (i, j))
        support = zero_subset_sum([c[i] + c[j], *c[3 : q + 2]], q)
        chosen = [m + 2 for m in support[1:]]
        for m in chosen:
            values[m] = 1
        target = -sum(d[m] for m in chosen if m < t) % p
        inv = pow(d[j], -1, p)
        x_i = next(
            v for v in range(1, p) if (target - d[i] * v) * inv % p
        )
        values[i] = x_i
        values[j] = (target - d[i] * x_i) * inv % p
        pivot = (rest, j)
        logger.debug(f"mod p^2 pair ({i}, {j}) with subset {chosen}")
    sol = FpSolution(values=tuple(values), pivot=pivot)
    if not _mod_p2_holds(inst, sol):
        msg = f"mod p^2 construction failed direct evaluation: {values}"
        logger.error(msg)
        raise InternalError(msg)
    return sol


@jaxtyped(typechecker=beartype)
def solve_sextic_exception(
    a: Sequence[int],
    b: Sequence[int],
    c: Sequence[int],
    d: Sequence[int],
) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Solve the k = 6, p = 3 pair with three unit-d variables at level 1.

    sum a_i x_i^6 + 3 sum c_j y_j^6 = 0 mod 9 and
    sum b_i x_i + sum d_j y_j = 0 mod 3 with some x_i a unit. The y's
    are set to a pattern (+-z, +-z or 0, +-z) whose c-sum vanishes mod 3,
    leaving D z in the linear congruence with D = d_l or 2 d_l.

    Returns:
        tuple[tuple[int, ...], tuple[int, ...]]: x (nine values) and y
            (three values), each in [0, 3).

    Raises:
        PreconditionViolated: Wrong lengths, or 3 divides some a, c or d.

    """
    if len(a) != SEXTIC_X or len(b) != SEXTIC_X:
        msg = f"need nine a and b coefficients, got {len(a)} and {len(b)}"
        raise PreconditionViolated(msg)
    if len(c) != SEXTIC_Y or len(d) != SEXTIC_Y:
        msg = f"need three c and d coefficients, got {len(c)} and {len(d)}"
        raise PreconditionViolated(msg)
    if any(v % 3 == 0 for v in (*a, *c, *d)):
        msg = "a, c and d must be prime to 3"
        raise PreconditionViolated(msg)
    cr = [v % 3 for v in c]
    dr = [v % 3 for v in d]
    pattern = [0, 0, 0]
    if len(set(cr)) == 1:
        if len(set(dr)) == 1:
            pattern = [1, 1, -1]
            big_d = dr[0]
        else:
            pattern = [1, 1, 1]
            odd = next(m for m in range(3) if dr.count(dr[m]) == 1)
            big_d = dr[(odd + 1) % 3]
    else:
        odd = next(m for m in range(3) if cr.count(cr[m]) == 1)
        first, second = (m for m in range(3) if m != odd)
        if dr[first] == dr[odd]:
            pattern[first] = pattern[odd] = 1
            big_d = 2 * dr[first]
        elif dr[second] == dr[odd]:
            pattern[second] = pattern[odd] = 1
            big_d = 2 * dr[second]
        else:
            pattern[first], pattern[odd] = 1, -1
            big_d = 2 * dr[first]
    support = zero_subset_sum([v % 9 for v in a], 9)
    x = [0] * SEXTIC_X
    for m in support:
        x[m] = 1
    linear = sum(bi * xi for bi, xi in zip(b, x, strict=True))
    z = -linear * pow(big_d, -1, 3) % 3
    y = tuple(v * z % 3 for v in pattern)
    logger.debug(f"sextic exception: y pattern {pattern}, z = {z}")
    return tuple(x), y


def _order_units_first(
    indices: Sequence[int], b: Sequence[int], p: int
) -> list[int]:
    units = [i for i in indices if b[i] % p]
    return units + [i for i in indices if b[i] % p == 0]


def _mod_p2_point(
    system: DiagLinSystem, ctx: PadicContext, level0: Sequence[int]
) -> list[int]:
    """Point from the mod p^2 solver on the level-0 block, zero elsewhere."""
    p = ctx.p
    order = _order_units_first(level0, system.b, p)
    t = sum(1 for i in order if system.b[i] % p)
    point = [0] * system.s
    if t == 0:
        support = zero_subset_sum([system.a[i] for i in order], p * p)
        for m in support:
            point[order[m]] = 1
        return point
    sol = solve_mod_p2(
        ModP2Instance(
            c=tuple(system.a[i] for i in order),
            d=tuple(system.b[i] for i in order[:t]),
            ctx=ctx,
        )
    )
    for pos, i in enumerate(order):
        point[i] = sol.values[pos]
    return point


def _level_zero_solution(
    system: DiagLinSystem, ctx: PadicContext, block: Sequence[int]
) -> dict[int, int]:
    """Nontrivial x on `block` with sum a x^k = sum b x = 0 mod p."""
    p = ctx.p
    a = [system.a[i] for i in block]
    b = [system.b[i] for i in block]
    values: list[int]
    if all(v % p == 0 for v in b):
        sol = solve_unit_diagonal_mod_p(a, ctx)
        if not sol.solved:
            msg = f"no diagonal zero mod {p} on {len(a)} variables"
            raise InternalError(msg)
        values = list(sol.values)
    elif p == 3:
        support = olson_zero_sum(list(zip(a, b, strict=True)))
        values = [1 if m in support else 0 for m in range(len(a))]
    else:
        sol = solve_unit_pair_mod_p(a, b, ctx)
        if sol.solved:
            values = list(sol.values)
        elif sol.shape is not None:
            # singular but nontrivial: x_1 = b_2, x_2 = -b_1 on the header
            values = [0] * len(a)
            i, j = sol.shape.permutation[:2]
            values[i] = sol.shape.b2 % p
            values[j] = -sol.shape.b1 % p
        else:
            msg = f"pair solver gave {sol.kind} on {len(a)} variables"
            raise InternalError(msg)
    if not any(v % p for v in values):
        msg = "level-zero solution is trivial"
        raise InternalError(msg)
    return {i: v for i, v in zip(block, values, strict=True)}


def _carry(system: DiagLinSystem, ctx: PadicContext, x: dict[int, int]) -> int:
    """c with sum a_i x_i^k = c p, computed exactly."""
    p = ctx.p
    total = sum(system.a[i] * v**ctx.k for i, v in x.items())
    if total % p:
        msg = f"level-zero diagonal sum {total} is not divisible by {p}"
        raise InternalError(msg)
    return total // p


def _close_carry(
    carry: int, coeffs: Sequence[int], p: int
) -> tuple[int, ...] | None:
    """Subset J with carry + sum_{j in J} coeffs_j = 0 mod p."""
    if carry % p == 0:
        return ()
    return subset_sum_to(coeffs, p, -carry)


@jaxtyped(typechecker=beartype)
def solve_type_a(transcript: Transcript, ctx: PadicContext) -> EngineResult:
    """Type A: the linear congruence lives on the level-0 block only.

    Raises:
        NotApplicable: Outside the frame, not type A, or too few variables.
        InternalError: A guaranteed step failed.

    """
    system = transcript.system
    _check_frame(ctx, system)
    p = ctx.p
    st = stats(system, ctx)
    if st.type != SystemType.A:
        msg = "system is not of type A"
        raise NotApplicable(msg)
    level0 = [i for i, v in enumerate(st.nu) if v == 0]
    level1 = [i for i, v in enumerate(st.nu) if v == 1]
    unit_b = [i for i in level0 if system.b[i] % p]
    if not unit_b:
        msg = "type A system without a unit linear coefficient at level 0"
        raise NotApplicable(msg)
    if len(level0) >= p * p + 2:
        point = _mod_p2_point(system, ctx, level0)
        route = "mod-p2"
    else:
        pinned = unit_b[0]
        x = _level_zero_solution(
            system, ctx, [i for i in level0 if i != pinned]
        )
        carry = _carry(system, ctx, x)
        coeffs = [system.a[i] // p for i in level1]
        chosen = _close_carry(carry, coeffs, p)
        if chosen is None:
            msg = f"carry {carry} not closed by {len(coeffs)} level-1 terms"
            raise InternalError(msg)
        point = [0] * system.s
        for i, v in x.items():
            point[i] = v
        for m in chosen:
            point[level1[m]] = 1
        route = "level-one-carry"
        logger.debug(f"type A carry {carry} closed by {len(chosen)} terms")
    result = witness_at(EngineTag.PPM1, transcript, ctx, point, route)
    if result is None:
        msg = f"type A route {route} produced no witness"
        raise InternalError(msg)
    return result


def _contract_unit_d(
    c: Sequence[int], units: Sequence[int], p: int
) -> list[tuple[int, int]]:
    """Disjoint pairs among `units` with c_i + c_j a unit mod p.

    Three candidates are kept in play; the pair with a unit sum leaves and
    the third waits for the next round.
    """
    pairs: list[tuple[int, int]] = []
    pool = list(units)
    while len(pool) >= 3:
        choice = pair_with_nonzero_sum([c[m] for m in pool[:3]], p)
        i, j = (pool[m] for m in choice.pair)
        pairs.append((i, j))
        pool = [m for m in pool if m not in (i, j)]
    return pairs


def _type_b_level_one(
    system: DiagLinSystem,
    ctx: PadicContext,
    level1: Sequence[int],
    carry: int,
) -> tuple[dict[int, int], str]:
    """y values closing carry + sum c_j y_j^k = sum d_j y_j = 0 mod p."""
    p = ctx.p
    c = [system.a[i] // p for i in level1]
    d = [system.b[i] for i in level1]
    units = [m for m in range(len(level1)) if d[m] % p]
    others = [m for m in range(len(level1)) if d[m] % p == 0]
    y: dict[int, int] = {}
    if len(units) <= 2:
        chosen = _close_carry(carry, [c[m] for m in others], p)
        if chosen is None:
            msg = f"carry {carry} not closed with {len(others)} free terms"
            raise InternalError(msg)
        for m in chosen:
            y[level1[others[m]]] = 1
        return y, "zeroed-units"
    pairs = _contract_unit_d(c, units, p)
    coeffs = [c[i] + c[j] for i, j in pairs] + [c[m] for m in others]
    if p >= 5 and len(coeffs) < p - 1:
        msg = f"contracted carry equation has {len(coeffs)} < p - 1 terms"
        logger.error(msg)
        raise InternalError(msg)
    chosen = _close_carry(carry, coeffs, p)
    if chosen is None:
        msg = f"carry {carry} not closed by {len(coeffs)} contracted terms"
        raise InternalError(msg)
    for m in chosen:
        if m < len(pairs):
            i, j = pairs[m]
            y[level1[i]] = d[j] % p
            y[level1[j]] = -d[i] % p
        else:
            y[level1[others[m - len(pairs)]]] = 1
    return y, "paired-units"


def _sextic_point(
    system: DiagLinSystem, level0: Sequence[int], level1: Sequence[int]
) -> list[int]:
    xs = list(level0[:SEXTIC_X])
    ys = list(level1[:SEXTIC_Y])
    x, y = solve_sextic_exception(
        [system.a[i] for i in xs],
        [system.b[i] for i in xs],
        [system.a[i] // 3 for i in ys],
        [system.b[i] for i in ys],
    )
    point = [0] * system.s
    for i, v in zip(xs, x, strict=True):
        point[i] = v
    for i, v in zip(ys, y, strict=True):
        point[i] = v
    return point


@jaxtyped(typechecker=beartype)
def solve_type_b(transcript: Transcript, ctx: PadicContext) -> EngineResult:
    """Type B: some variable above level 0 carries a unit linear coefficient.

    Every route leaves some level-0 x a unit; the low variable supplies
    the other column of the pivot minor.

    Raises:
        NotApplicable: Outside the frame or not type B.
        InternalError: No sub-case applies.

    """
    system = transcript.system
    _check_frame(ctx, system)
    p = ctx.p
    st = stats(system, ctx)
    if st.type != SystemType.B:
        msg = "system is not of type B"
        raise NotApplicable(msg)
    level0 = [i for i, v in enumerate(st.nu) if v == 0]
    level1 = [i for i, v in enumerate(st.nu) if v == 1]
    unit_d = [i for i in level1 if system.b[i] % p]
    if len(level0) >= p * p + 2:
        point = _mod_p2_point(system, ctx, level0)
        route = "mod-p2"
    elif p == 3 and len(unit_d) == len(level1) and len(level1) in (3, 4):
        if len(level0) < SEXTIC_X:
            msg = (
                "sextic exception needs nine level-0 variables,"
                f" got {len(level0)}"
            )
            raise InternalError(msg)
        point = _sextic_point(system, level0, level1)
        route = "sextic-exception"
    else:
        x = _level_zero_solution(system, ctx, level0[1:])
        carry = _carry(system, ctx, x)
        y, route = _type_b_level_one(system, ctx, level1, carry)
        point = [0] * system.s
        for i, v in (*x.items(), *y.items()):
            point[i] = v
        logger.debug(f"type B carry {carry} closed by route {route}")
    result = witness_at(EngineTag.PPM1, transcript, ctx, point, route)
    if result is None:
        msg = f"type B route {route} produced no witness"
        raise InternalError(msg)
    return result


@jaxtyped(typechecker=beartype)
def solve_ppm1(transcript: Transcript, ctx: PadicContext) -> EngineResult:
    """Dispatch on the system type."""
    kind = stats(transcript.system, ctx).type
    solver = solve_type_a if kind == SystemType.A else solve_type_b
    route = f"type-{kind.value}"
    try:
        result = solver(transcript, ctx)
    except NotApplicable as exc:
        return unresolved(EngineTag.PPM1, transcript, route, str(exc))
    except (InternalError, PreconditionViolated) as exc:
        logger.warning(f"type {kind.value} construction failed: {exc}")
        return unresolved(EngineTag.PPM1, transcript, route, str(exc))
    logger.info(f"type {kind.value} solved by route {result.route}")
    return result
