"""Pairwise contraction: kill the linear form, then solve one diagonal form.

Variables are paired as (x_i, x_j) -> (b_j y, -b_i y), so every pair
contributes nothing to the linear form and c = a_i b_j^k + a_j b_i^k to the
diagonal one. The contracted equation is conditioned like a system and
searched for a unit coordinate at a unit coefficient modulo p^(2 v_p(k)+1);
the resulting point is a Newton line witness along that coordinate.
"""

from typing import Literal

from beartype import beartype
from klogr import get_logger
from pydantic import ConfigDict
from pydantic.dataclasses import dataclass

from padicsol._errors import BudgetExceeded, InternalError
from padicsol._types import CertificateKind, EngineTag, PadicContext
from padicsol.core import DiagLinSystem, Transcript, grouping_step
from padicsol.engines.base import EngineResult, exact_result, unresolved
from padicsol.hensel import LineWitness
from padicsol.normalize import shift_levels
from padicsol.oracle import find_unit_solution
from padicsol.tools.cache import jaxtyped
from padicsol.tools.config import DEFAULT_BUDGET

logger = get_logger()

Coverage = Literal["two-power", "coprime", "divisible", "specialized"]


@dataclass(config=ConfigDict(extra="forbid", frozen=True), kw_only=True)
class DiagonalEquation:
    """c_1 y_1^k + ... + c_t y_t^k = 0."""

    coefficients: tuple[int, ...]
    """The contracted coefficients c_l."""
    k: int
    """Degree."""
    p: int
    """Prime."""

    @property
    def t(self) -> int:
        """Number of variables."""
        return len(self.coefficients)


@dataclass(config=ConfigDict(extra="forbid", frozen=True), kw_only=True)
class DispatchInfo:
    """Engine choice for (k, p) plus coverage metadata."""

    engine: EngineTag
    """The engine the solver runs first."""
    coverage: Coverage
    """Which family of (k, p) the contraction argument covers."""
    odd_degree: bool
    """k is odd: only the contraction route is attempted."""


@jaxtyped(typechecker=beartype)
def dispatch_case(ctx: PadicContext) -> DispatchInfo:
    """Select the engine for (k, p).

    p = 2 with k in {4, 8, 16, 32} goes to the powers-of-two calculus,
    k = p - 1 and k = p(p - 1) for odd p to their own engines, everything
    else to contraction.
    """
    p, k = ctx.p, ctx.k
    odd = k % 2 == 1
    if p == 2 and k in (4, 8, 16, 32):
        return DispatchInfo(
            engine=EngineTag.POW2, coverage="specialized", odd_degree=odd
        )
    if p > 2 and k == p - 1:
        return DispatchInfo(
            engine=EngineTag.PM1, coverage="specialized", odd_degree=odd
        )
    if p > 2 and k == p * (p - 1):
        return DispatchInfo(
            engine=EngineTag.PPM1, coverage="specialized", odd_degree=odd
        )
    if p == 2:
        coverage: Coverage = "two-power"
    elif k % p:
        coverage = "coprime"
    else:
        coverage = "divisible"
    return DispatchInfo(
        engine=EngineTag.CONTRACT, coverage=coverage, odd_degree=odd
    )


def pairing_order(system: DiagLinSystem, p: int) -> list[int]:
    """Stable order with unit linear coefficients first."""
    return sorted(range(system.s), key=lambda i: system.b[i] % p == 0)


@jaxtyped(typechecker=beartype)
def contract_linear(
    transcript: Transcript,
    ctx: PadicContext,
    order: list[int] | None = None,
) -> tuple[DiagonalEquation, Transcript]:
    """Pair consecutive variables of `order` so the linear form vanishes.

    Args:
        transcript (Transcript): Transcript whose derived system is
            contracted.
        ctx (PadicContext): The frame.
        order (list[int] | None): Pairing order; `pairing_order` when None.

    Returns:
        tuple[DiagonalEquation, Transcript]: The contracted equation and the
            transcript extended by the contraction step.

    """
    system = transcript.system
    k = ctx.k
    if order is None:
        order = pairing_order(system, ctx.p)
    groups = []
    for pos in range(len(order) // 2):
        i, j = order[2 * pos], order[2 * pos + 1]
        bi, bj = system.b[i], system.b[j]
        u_i, u_j = (1, 1) if bi == 0 and bj == 0 else (bj, -bi)
        groups.append([(m, u) for m, u in ((i, u_i), (j, u_j)) if u])
    out = transcript.then(grouping_step(groups, system.s, label="contract"))
    derived = out.system
    if any(derived.b):
        msg = f"contraction left a linear form {derived.b}"
        logger.error(msg)
        raise InternalError(msg)
    eq = DiagonalEquation(coefficients=derived.a, k=k, p=ctx.p)
    logger.debug(f"contracted s={system.s} to t={eq.t}")
    return eq, out


def _exact_shortcut(
    transcript: Transcript,
) -> EngineResult | None:
    c = transcript.system.a
    t = len(c)
    for pos, cl in enumerate(c):
        if cl == 0:
            point = [0] * t
            point[pos] = 1
            return exact_result(
                EngineTag.CONTRACT, transcript, "zero-coefficient", point
            )
    seen: dict[int, int] = {}
    for pos, cl in enumerate(c):
        if -cl in seen:
            point = [0] * t
            point[seen[-cl]] = point[pos] = 1
            return exact_result(
                EngineTag.CONTRACT, transcript, "opposite-pair", point
            )
        seen.setdefault(cl, pos)
    return None


@jaxtyped(typechecker=beartype)
def solve_diagonal(
    transcript: Transcript,
    ctx: PadicContext,
    budget: int = DEFAULT_BUDGET,
) -> EngineResult:
    """Solve the diagonal equation held by `transcript.system` (b = 0).

    Exact shortcuts first (a zero coefficient, or c_i = -c_j); otherwise
    condition the levels, search a solution modulo p^(2 v_p(k) + 1) with a
    unit value at a unit coefficient, and return it as a line witness
    along that coordinate.
    """
    shortcut = _exact_shortcut(transcript)
    if shortcut is not None:
        return shortcut
    if transcript.system.s < 2:
        return unresolved(
            EngineTag.CONTRACT,
            transcript,
            "diagonal",
            "one nonzero coefficient has no nontrivial zero",
        )
    transcript, shift = shift_levels(transcript, ctx)
    system = transcript.system
    p = ctx.p
    exponent = ctx.newton_exponent
    pivots = [i for i, c in enumerate(system.a) if c % p]
    try:
        found = find_unit_solution(
            system.a, ctx.k, p, exponent, pivots, budget
        )
    except BudgetExceeded as exc:
        return unresolved(EngineTag.CONTRACT, transcript, "diagonal", str(exc))
    if found is None:
        return unresolved(
            EngineTag.CONTRACT,
            transcript,
            "diagonal",
            f"no unit-coordinate zero mod {p}^{exponent} after shift {shift}",
        )
    point, pivot = found
    base = list(point)
    base[pivot] = 0
    direction = [0] * system.s
    direction[pivot] = 1
    logger.debug(f"diagonal zero mod {p}^{exponent} with unit at y_{pivot}")
    return EngineResult(
        engine=EngineTag.CONTRACT,
        route="diagonal",
        transcript=transcript,
        kind=CertificateKind.NEWTON_LINE,
        line=LineWitness(
            point=tuple(base),
            direction=tuple(direction),
            t0=point[pivot],
            ctx=ctx,
            system=system,
        ),
    )


@jaxtyped(typechecker=beartype)
def solve_contract(
    transcript: Transcript,
    ctx: PadicContext,
    budget: int = DEFAULT_BUDGET,
) -> EngineResult:
    """Contract and solve, trying a few pairing orders."""
    system = transcript.system
    base = pairing_order(system, ctx.p)
    orders = [base, base[1:] + base[:1], base[::-1]]
    result: EngineResult | None = None
    for order in orders:
        if system.s < 2:
            break
        _, contracted = contract_linear(transcript, ctx, order)
        result = solve_diagonal(contracted, ctx, budget)
        if result.resolved:
            logger.info(f"contraction solved with route {result.route}")
            return result
    return result or unresolved(
        EngineTag.CONTRACT, transcript, "diagonal", "nothing to contract"
    )
