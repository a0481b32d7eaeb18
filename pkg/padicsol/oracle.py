"""Exhaustive ground truth for the congruence pair

    A(x) = sum a_i x_i^k = 0 mod p^g,    B(x) = sum b_i x_i = 0 mod p,

with a unit pivot minor (a non-singular solution).

`find_nonsingular` is a dynamic programme over states
(A mod p^g, B mod p, span of the Jacobian columns chosen so far). The span
coordinate takes p + 3 values: rank 0, one id per line of F_p^2, rank 2.
A column of variable i is (a_i x_i^(k-1), b_i) mod p, so a zero value still
contributes (0, b_i). Back-pointer layers give the witness with a fixed
tie-break: smallest value first, then smallest source span.

When k = p^tau (p - 1) and g <= gamma every unit has x^k = 1 mod p^g, so a
variable only needs the values 0 and 1..p-1 (just 1 for p = 2).
"""

import itertools
from collections.abc import Iterator, Sequence

import numpy as np
from beartype import beartype
from jaxtyping import Bool, Int16
from klogr import get_logger
from pydantic import ConfigDict
from pydantic.dataclasses import dataclass

from padicsol._errors import BudgetExceeded, ContextNotApplicable, InvalidInput
from padicsol._types import PadicContext
from padicsol.core import DiagLinSystem, find_unit_minor
from padicsol.tools.cache import jaxtyped, lru_cache
from padicsol.tools.config import DEFAULT_BUDGET

logger = get_logger()


@dataclass(
    config=ConfigDict(
        extra="forbid", frozen=True, arbitrary_types_allowed=True
    ),
    kw_only=True,
)
class CongruenceQuery:
    """A congruence pair to search, with its search budget."""

    system: DiagLinSystem
    """The coefficient vectors."""
    ctx: PadicContext
    """The arithmetic frame."""
    modulus_exponent: int | None = None
    """g in A = 0 mod p^g; defaults to gamma (or 2 v_p(k) + 1)."""
    budget: int = DEFAULT_BUDGET
    """Maximum number of search states."""
    generic: bool = False
    """Use residue tables instead of the unit-power collapse."""

    def __post_init__(self) -> None:
        """Validate the budget and the modulus exponent."""
        if self.budget <= 0:
            msg = f"budget must be positive, got {self.budget}"
            raise InvalidInput(msg)
        if self.modulus_exponent is not None and self.modulus_exponent < 1:
            msg = f"modulus exponent must be >= 1, got {self.modulus_exponent}"
            raise InvalidInput(msg)

    @property
    def exponent(self) -> int:
        """The effective g."""
        if self.modulus_exponent is not None:
            return self.modulus_exponent
        if self.ctx.gamma is not None:
            return self.ctx.gamma
        return self.ctx.newton_exponent

    @property
    def collapsed(self) -> bool:
        """True when the unit-power collapse applies."""
        return (
            not self.generic
            and self.ctx.gamma is not None
            and self.exponent <= self.ctx.gamma
        )


@dataclass(config=ConfigDict(extra="forbid", frozen=True), kw_only=True)
class OracleReport:
    """Outcome of an exhaustive search."""

    found: bool
    """Whether a non-singular solution exists (within the budget)."""
    witness: tuple[int, ...] | None = None
    """A solution with entries in [0, p^g)."""
    nonsingular_pivot: tuple[int, int] | None = None
    """0-based pivot pair with a unit minor."""
    exhausted: bool = True
    """True when the whole reduced space was covered."""
    states: int = 0
    """Number of DP states times transitions visited."""


@lru_cache(maxsize=256)
def kth_power_table(k: int, modulus: int) -> tuple[int, ...]:
    """x^k mod `modulus` for every residue x."""
    return tuple(pow(x, k, modulus) for x in range(modulus))


def unit_values(p: int) -> tuple[int, ...]:
    """Unit representatives used under the collapse (only 1 for p = 2)."""
    return (1,) if p == 2 else tuple(range(1, p))


def _line_id(alpha: int, beta: int, p: int) -> int:
    if alpha % p:
        return 1 + beta * pow(alpha, -1, p) % p
    return p + 1


def _span_map(alpha: int, beta: int, p: int) -> tuple[int, ...]:
    """Where each span id goes after adding the column (alpha, beta)."""
    full = p + 2
    if alpha % p == 0 and beta % p == 0:
        return tuple(range(p + 3))
    line = _line_id(alpha, beta, p)
    return (line,) + tuple(
        s if s == line else full for s in range(1, p + 2)
    ) + (full,)


def _options(
    query: CongruenceQuery,
) -> list[list[tuple[int, int, int, tuple[int, ...]]]]:
    """Per variable: (value, A-shift, B-shift, span map) choices."""
    ctx, system = query.ctx, query.system
    p, k = ctx.p, ctx.k
    modulus = p**query.exponent
    if query.collapsed:
        values: Sequence[int] = (0, *unit_values(p))
        powers = {x: (1 if x else 0) for x in values}
    else:
        table = kth_power_table(k, modulus)
        seen: dict[tuple[int, int], int] = {}
        for x in range(modulus):
            seen.setdefault((x % p, table[x]), x)
        values = sorted(seen.values())
        powers = {x: table[x] for x in values}
    out = []
    for ai, bi in zip(system.a, system.b, strict=True):
        opts = []
        for x in values:
            alpha = ai * pow(x, k - 1, p) % p
            opts.append(
                (
                    x,
                    ai * powers[x] % modulus,
                    bi * x % p,
                    _span_map(alpha, bi % p, p),
                )
            )
        out.append(opts)
    return out


@jaxtyped(typechecker=beartype)
def _layer(
    reach: Bool[np.ndarray, "m q n"],
    opts: list[tuple[int, int, int, tuple[int, ...]]],
) -> tuple[Int16[np.ndarray, "m q n"], Int16[np.ndarray, "m q n"]]:
    """One DP layer: smallest reaching option and its source span."""
    choice = np.full(reach.shape, -1, dtype=np.int16)
    parent = np.full(reach.shape, -1, dtype=np.int16)
    for o, (_, shift_a, shift_b, span_map) in enumerate(opts):
        shifted = np.roll(np.roll(reach, shift_a, axis=0), shift_b, axis=1)
        for src, dst in enumerate(span_map):
            mask = shifted[:, :, src] & (choice[:, :, dst] < 0)
            if mask.any():
                choice[:, :, dst][mask] = o
                parent[:, :, dst][mask] = src
    return choice, parent


@jaxtyped(typechecker=beartype)
def find_nonsingular(query: CongruenceQuery) -> OracleReport:
    """Decide whether the congruence pair has a non-singular solution.

    Args:
        query (CongruenceQuery): The system, frame, exponent and budget.

    Returns:
        OracleReport: `found` with a witness and pivot, or `found=False`;
            `exhausted=False` only when the budget truncated the search.

    Raises:
        ContextNotApplicable: If k has no tau and `generic` is not set.

    """
    ctx = query.ctx
    if not query.ctx.has_tau and not query.generic:
        msg = f"k={ctx.k}, p={ctx.p}: pass generic=True for residue tables"
        raise ContextNotApplicable(msg)
    p = ctx.p
    modulus = p**query.exponent
    n_spans = p + 3
    options = _options(query)
    cost = modulus * p * n_spans * sum(len(o) for o in options)
    if cost > query.budget:
        logger.warning(
            f"oracle budget {query.budget} below {cost} states; search skipped"
        )
        return OracleReport(found=False, exhausted=False, states=0)
    reach = np.zeros((modulus, p, n_spans), dtype=bool)
    reach[0, 0, 0] = True
    layers = []
    for opts in options:
        choice, parent = _layer(reach, opts)
        layers.append((choice, parent))
        reach = choice >= 0
    full = p + 2
    if not reach[0, 0, full]:
        return OracleReport(found=False, exhausted=True, states=cost)
    state_a, state_b, span = 0, 0, full
    witness = [0] * query.system.s
    for i in range(query.system.s - 1, -1, -1):
        choice, parent = layers[i]
        o = int(choice[state_a, state_b, span])
        value, shift_a, shift_b, _ = options[i][o]
        witness[i] = value
        span = int(parent[state_a, state_b, span])
        state_a = (state_a - shift_a) % modulus
        state_b = (state_b - shift_b) % p
    pivot = find_unit_minor(query.system, witness, ctx.k, p)
    return OracleReport(
        found=True,
        witness=tuple(witness),
        nonsingular_pivot=pivot,
        exhausted=True,
        states=cost,
    )


@jaxtyped(typechecker=beartype)
def naive_nonsingular(query: CongruenceQuery) -> OracleReport:
    """Full enumeration over (Z/p^g)^s; small instances only."""
    ctx, system = query.ctx, query.system
    p, k = ctx.p, ctx.k
    modulus = p**query.exponent
    total = modulus**system.s
    if total > query.budget:
        msg = f"naive enumeration needs {total} points, budget {query.budget}"
        raise BudgetExceeded(msg)
    for x in itertools.product(range(modulus), repeat=system.s):
        big_a, big_b = system.form_values(x, k)
        if big_a % modulus or big_b % p:
            continue
        pivot = find_unit_minor(system, x, k, p)
        if pivot is not None:
            return OracleReport(
                found=True,
                witness=tuple(x),
                nonsingular_pivot=pivot,
                states=total,
            )
    return OracleReport(found=False, states=total)


def enumerate_solutions(query: CongruenceQuery) -> Iterator[tuple[int, ...]]:
    """Yield every nonzero solution of the pair up to unit collapse.

    Supports are visited by size, then lexicographically; values on a
    support in lexicographic order of the unit representatives.

    Raises:
        ContextNotApplicable: Without tau (the collapse is required).
        BudgetExceeded: If the reduced space exceeds the budget.

    """
    if not query.collapsed:
        msg = "solution enumeration needs the unit-power collapse"
        raise ContextNotApplicable(msg)
    system, ctx = query.system, query.ctx
    p = ctx.p
    modulus = p**query.exponent
    units = unit_values(p)
    total = (1 + len(units)) ** system.s - 1
    if total > query.budget:
        msg = f"reduced space has {total} vectors, budget {query.budget}"
        raise BudgetExceeded(msg)
    for size in range(1, system.s + 1):
        for support in itertools.combinations(range(system.s), size):
            if sum(system.a[i] for i in support) % modulus:
                continue
            for values in itertools.product(units, repeat=size):
                if sum(
                    system.b[i] * v for i, v in zip(support, values, strict=True)
                ) % p:
                    continue
                x = [0] * system.s
                for i, v in zip(support, values, strict=True):
                    x[i] = v
                yield tuple(x)


@dataclass(config=ConfigDict(extra="forbid", frozen=True), kw_only=True)
class GammaStarReport:
    """Result of the gamma-star enumeration."""

    gamma_star: int
    """The smallest t that works for every unit coefficient tuple."""
    exhausted: bool
    """True when every tuple for every t <= gamma_star was checked."""
    counterexample: tuple[int, ...] | None = None
    """A (t-1)-tuple without a unit-coordinate solution, if t > 1."""


def _has_unit_solution(
    coeffs: Sequence[int], table: Sequence[int], p: int, modulus: int
) -> bool:
    unit_res = sorted({table[x] for x in range(modulus) if x % p})
    zero_res = sorted({table[x] for x in range(0, modulus, p)})
    any_res = sorted(set(table))
    # reach[flag] = residues reachable; flag 1 once a unit value is used.
    plain = np.zeros(modulus, dtype=bool)
    with_unit = np.zeros(modulus, dtype=bool)
    plain[0] = True
    for c in coeffs:
        new_plain = np.zeros(modulus, dtype=bool)
        new_unit = np.zeros(modulus, dtype=bool)
        for r in zero_res:
            new_plain |= np.roll(plain, c * r % modulus)
        for r in any_res:
            new_unit |= np.roll(with_unit, c * r % modulus)
        for r in unit_res:
            new_unit |= np.roll(plain, c * r % modulus)
        plain, with_unit = new_plain, new_unit
    return bool(with_unit[0])


@jaxtyped(typechecker=beartype)
def gamma_star_bruteforce(
    k: int, p: int, l: int, coeff_budget: int = DEFAULT_BUDGET
) -> GammaStarReport:
    """Smallest t such that every unit tuple c_1..c_t has a solution of
    sum c_i x_i^k = 0 mod p^l with some x_i a unit.

    Tuples are taken up to scaling (one coefficient is 1) and order.

    Raises:
        BudgetExceeded: With `lower_bound` set to the best proven bound.

    """
    if k < 1 or l < 1 or p < 2:
        msg = f"invalid gamma-star arguments k={k}, p={p}, l={l}"
        raise InvalidInput(msg)
    modulus = p**l
    table = kth_power_table(k, modulus)
    units = [u for u in range(1, modulus) if u % p]
    spent = 0
    counterexample: tuple[int, ...] | None = None
    t = 1
    while True:
        failure = None
        for rest in itertools.combinations_with_replacement(units, t - 1):
            coeffs = (1, *rest)
            spent += t * modulus * len(table)
            if spent > coeff_budget:
                msg = f"gamma*({k}, {p}^{l}) search truncated at t={t}"
                raise BudgetExceeded(msg, lower_bound=t)
            if not _has_unit_solution(coeffs, table, p, modulus):
                failure = coeffs
                break
        if failure is None:
            logger.info(f"gamma*({k}, {p}^{l}) = {t}")
            return GammaStarReport(
                gamma_star=t, exhausted=True, counterexample=counterexample
            )
        counterexample = failure
        t += 1


@jaxtyped(typechecker=beartype)
def find_unit_solution(
    coeffs: Sequence[int],
    k: int,
    p: int,
    exponent: int,
    pivots: Sequence[int] | None = None,
    budget: int = DEFAULT_BUDGET,
) -> tuple[tuple[int, ...], int] | None:
    """Solve sum c_i x_i^k = 0 mod p^exponent with x_i a unit for a pivot i.

    States are (flag, residue) where the flag records that some pivot
    variable already holds a unit. Values are deduplicated by k-th power
    residue (and unit-ness on pivots), smallest representative first.

    Args:
        coeffs (Sequence[int]): The diagonal coefficients.
        k (int): The degree.
        p (int): The prime.
        exponent (int): The congruence exponent.
        pivots (Sequence[int] | None): Indices allowed to carry the unit;
            all indices when None.
        budget (int): State budget.

    Returns:
        tuple[tuple[int, ...], int] | None: The point and its unit pivot, or
            None when no such solution exists.

    Raises:
        BudgetExceeded: If the state space exceeds `budget`.

    """
    modulus = p**exponent
    table = kth_power_table(k, modulus)
    pivot_set = set(range(len(coeffs)) if pivots is None else pivots)
    reps: dict[int, int] = {}
    unit_reps: dict[int, int] = {}
    for x in range(modulus):
        reps.setdefault(table[x], x)
        if x % p:
            unit_reps.setdefault(table[x], x)
    options = []
    for i, c in enumerate(coeffs):
        opts = [(x, c * r % modulus, False) for r, x in reps.items()]
        if i in pivot_set:
            opts += [(x, c * r % modulus, True) for r, x in unit_reps.items()]
        options.append(sorted(opts, key=lambda o: (o[2], o[0])))
    cost = 2 * modulus * sum(len(o) for o in options)
    if cost > budget:
        msg = f"unit-solution search needs {cost} states, budget {budget}"
        raise BudgetExceeded(msg)
    reach = np.zeros((2, modulus), dtype=bool)
    reach[0, 0] = True
    layers = []
    for opts in options:
        choice = np.full((2, modulus), -1, dtype=np.int32)
        parent = np.full((2, modulus), -1, dtype=np.int8)
        for o, (_, shift, sets_flag) in enumerate(opts):
            shifted = np.roll(reach, shift, axis=1)
            for src in (0, 1):
                dst = 1 if sets_flag or src else 0
                mask = shifted[src] & (choice[dst] < 0)
                if mask.any():
                    choice[dst][mask] = o
                    parent[dst][mask] = src
        layers.append((choice, parent))
        reach = choice >= 0
    if not reach[1, 0]:
        return None
    flag, state = 1, 0
    point = [0] * len(coeffs)
    pivot = -1
    for i in range(len(coeffs) - 1, -1, -1):
        choice, parent = layers[i]
        o = int(choice[flag, state])
        value, shift, _ = options[i][o]
        src = int(parent[flag, state])
        if flag == 1 and src == 0:
            pivot = i
        point[i] = value
        flag = src
        state = (state - shift) % modulus
    return tuple(point), pivot
