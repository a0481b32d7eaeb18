"""The p = 2 engine for k = 4, 8, 16, 32.

Variables are contracted: a class of input variables is set to one common
value y, so it contributes (sum a_i) y^k and (sum b_i) y. A class has a
niveau (v_2 of its diagonal coefficient), a parity (of its linear
coefficient) and is primary when it holds an odd-a input variable. A
primary even class at niveau tau + 2, set to 1 with everything else 0,
solves the congruences modulo (2^(tau+2), 2); the pivot minor is odd as
soon as some zeroed input variable has an odd b (type A) or some variable
is low at level 0 (type B).

Classes always carry exact coefficients. The symbolic type (P/S, niveau,
parity) is read off them, and every rule application re-checks the gain it
promises.

Degree 4 systems of type B with three or more odd variables at niveau 3
cannot be handled this way; they go through the cycling transform
x -> 2x on niveaux 0..2 with the diagonal form divided by 8.
"""

from collections.abc import Sequence
from dataclasses import replace
from fractions import Fraction
from itertools import chain, combinations

from beartype import beartype
from klogr import get_logger
from pydantic import ConfigDict
from pydantic.dataclasses import dataclass

from padicsol._errors import (
    InternalError,
    NeedsCycling,
    NotApplicable,
    RuleViolation,
    ScheduleError,
)
from padicsol._types import EngineTag, PadicContext, SystemType, Valuation
from padicsol.core import DiagLinSystem, Transcript, scaling_step, stats, vp
from padicsol.engines.base import EngineResult, unresolved, witness_at
from padicsol.tools.cache import jaxtyped

logger = get_logger()

DEGREES = (4, 8, 16, 32)


@dataclass(config=ConfigDict(extra="forbid", frozen=True), kw_only=True)
class ContractionClass:
    """Input variables set to one common value."""

    members: tuple[int, ...]
    """Sorted input indices."""
    c: int
    """Sum of the members' diagonal coefficients."""
    d: int
    """Sum of the members' linear coefficients."""
    primary: bool
    """Some member has an odd diagonal coefficient."""
    provenance: str
    """Merge tree, e.g. `2P[x3, x7]`."""

    @property
    def niveau(self) -> Valuation:
        """v_2(c), INF when c = 0."""
        return vp(self.c, 2)

    @property
    def even(self) -> bool:
        """Parity of d."""
        return self.d % 2 == 0

    @property
    def residue(self) -> int:
        """Odd part of c modulo 4 (0 for c = 0)."""
        if self.c == 0:
            return 0
        return (self.c >> int(self.niveau)) % 4

    @property
    def tag(self) -> str:
        """Symbolic type such as `P1e` or `S3o`."""
        kind = "P" if self.primary else "S"
        level = "inf" if self.c == 0 else str(int(self.niveau))
        return f"{kind}{level}{'e' if self.even else 'o'}"

    @property
    def key(self) -> tuple[Valuation, int, int, int]:
        """Deterministic order: niveau, parity, residue, smallest member."""
        return (self.niveau, self.d % 2, self.residue, self.members[0])


@dataclass(config=ConfigDict(extra="forbid", frozen=True), kw_only=True)
class ContractionState:
    """Live classes plus the zeroed indices."""

    classes: tuple[ContractionClass, ...]
    """Classes still in play."""
    zeroed: frozenset[int]
    """Indices set to 0."""
    system: DiagLinSystem
    """The system the classes are drawn from."""
    ctx: PadicContext
    """Frame with p = 2."""
    target: int
    """tau + 2."""
    odd_zeroed_witness: int | None = None
    """A zeroed index with odd b, once one exists."""

    @property
    def goal(self) -> ContractionClass | None:
        """First primary even class at niveau >= target."""
        hits = [
            c
            for c in self.classes
            if c.primary and c.even and c.niveau >= self.target
        ]
        return min(hits, key=lambda c: c.key) if hits else None

    def select(
        self,
        *,
        primary: bool | None = None,
        niveau: int | None = None,
        at_least: int | None = None,
        even: bool | None = None,
    ) -> list[ContractionClass]:
        """Live classes matching every given filter, in `key` order."""
        out = [
            c
            for c in self.classes
            if (primary is None or c.primary == primary)
            and (niveau is None or c.niveau == niveau)
            and (at_least is None or c.niveau >= at_least)
            and (even is None or c.even == even)
        ]
        return sorted(out, key=lambda c: c.key)

    def covers(self) -> bool:
        """Classes and zeroed indices partition 0 .. s - 1."""
        seen = [i for c in self.classes for i in c.members]
        seen.extend(self.zeroed)
        return sorted(seen) == list(range(self.system.s))


@jaxtyped(typechecker=beartype)
def initial_state(system: DiagLinSystem, ctx: PadicContext) -> ContractionState:
    """One singleton class per variable."""
    if ctx.p != 2 or ctx.tau is None:
        msg = f"contractions need p = 2 and k = 2^tau, got {ctx.p}, {ctx.k}"
        raise NotApplicable(msg)
    classes = tuple(
        ContractionClass(
            members=(i,),
            c=a,
            d=b,
            primary=a % 2 == 1,
            provenance=f"x{i}",
        )
        for i, (a, b) in enumerate(zip(system.a, system.b, strict=True))
    )
    return ContractionState(
        classes=classes,
        zeroed=frozenset(),
        system=system,
        ctx=ctx,
        target=ctx.tau + 2,
    )


def _check_live(state: ContractionState, parts: Sequence[ContractionClass]) -> None:
    for part in parts:
        if part not in state.classes:
            msg = f"class {part.provenance} is not live"
            raise InternalError(msg)


@jaxtyped(typechecker=beartype)
def merge(
    state: ContractionState,
    *parts: ContractionClass,
    rule: str,
    at_least: int,
    exact: bool = False,
    even: bool | None = True,
) -> ContractionState:
    """Contract `parts` into one class and check the promised gain.

    The new class is appended last.

    Raises:
        RuleViolation: The merged niveau is below `at_least` (or differs
            from it with `exact`), or the parity is not `even`.

    """
    if len(parts) < 2:
        msg = f"{rule} needs at least two classes"
        raise InternalError(msg)
    _check_live(state, parts)
    merged = ContractionClass(
        members=tuple(sorted(chain.from_iterable(p.members for p in parts))),
        c=sum(p.c for p in parts),
        d=sum(p.d for p in parts),
        primary=any(p.primary for p in parts),
        provenance=f"{rule}[{', '.join(p.provenance for p in parts)}]",
    )
    niveau = merged.niveau
    if niveau < at_least or (exact and niveau != at_least):
        msg = (
            f"{rule} on {[p.tag for p in parts]} gave niveau {niveau},"
            f" expected {'exactly ' if exact else '>= '}{at_least}"
        )
        logger.error(msg)
        raise RuleViolation(msg)
    if even is not None and merged.even != even:
        msg = f"{rule} on {[p.tag for p in parts]} gave parity {merged.tag}"
        logger.error(msg)
        raise RuleViolation(msg)
    logger.debug(f"{rule}: {[p.tag for p in parts]} -> {merged.tag}")
    rest = tuple(c for c in state.classes if c not in parts)
    return replace(state, classes=(*rest, merged))


@jaxtyped(typechecker=beartype)
def drop(state: ContractionState, cls: ContractionClass) -> ContractionState:
    """Zero every member of `cls`."""
    _check_live(state, [cls])
    witness = state.odd_zeroed_witness
    if witness is None:
        witness = next(
            (i for i in cls.members if state.system.b[i] % 2), None
        )
    return replace(
        state,
        classes=tuple(c for c in state.classes if c != cls),
        zeroed=state.zeroed | set(cls.members),
        odd_zeroed_witness=witness,
    )


def _join(
    state: ContractionState,
    parts: Sequence[ContractionClass],
    rule: str,
    at_least: int,
) -> tuple[ContractionState, ContractionClass]:
    """Primary contraction to niveau `at_least`.

    A part that already is a primary even class at that niveau is kept
    and the others are zeroed.
    """
    ready = [
        p for p in parts if p.primary and p.even and p.niveau >= at_least
    ]
    if ready:
        keep = ready[0]
        for part in parts:
            if part != keep:
                state = drop(state, part)
        return state, keep
    state = merge(state, *parts, rule=rule, at_least=at_least)
    return state, state.classes[-1]


def _twin(
    group: Sequence[ContractionClass], *, same_parity: bool
) -> tuple[ContractionClass, ContractionClass] | None:
    for x, y in combinations(group, 2):
        if x.residue == y.residue and (not same_parity or x.even == y.even):
            return x, y
    return None


def _pair_matching(
    state: ContractionState,
    group: Sequence[ContractionClass],
    nu: int,
    *,
    same_parity: bool = True,
) -> tuple[ContractionState, ContractionClass, list[ContractionClass]]:
    """Two secondaries at exact niveau nu with equal residues mod 4.

    Their sum sits at exact niveau nu + 1.
    """
    twin = _twin(group, same_parity=same_parity)
    if twin is None:
        msg = f"no residue-matched pair among {[g.tag for g in group]}"
        raise ScheduleError(msg)
    x, y = twin
    state = merge(
        state,
        x,
        y,
        rule="3S",
        at_least=nu + 1,
        exact=True,
        even=True if same_parity else None,
    )
    rest = [g for g in group if g not in (x, y)]
    return state, state.classes[-1], rest


def _halve(
    state: ContractionState,
    group: Sequence[ContractionClass],
    nu: int,
    *,
    keep: int = 2,
    same_parity: bool = True,
) -> tuple[ContractionState, list[ContractionClass], list[ContractionClass]]:
    """Contract secondaries at niveau nu in pairs until `keep` are left.

    With `same_parity` the group must share one parity and every new
    class is even; otherwise parities are disregarded.
    """
    rest = sorted(group, key=lambda c: c.key)
    raised: list[ContractionClass] = []
    while len(rest) > keep and len(rest) >= 3:
        state, new, rest = _pair_matching(
            state, rest, nu, same_parity=same_parity
        )
        raised.append(new)
    return state, raised, rest


def _halve_by_parity(
    state: ContractionState, group: Sequence[ContractionClass], nu: int
) -> tuple[ContractionState, list[ContractionClass], list[ContractionClass]]:
    raised: list[ContractionClass] = []
    left: list[ContractionClass] = []
    for parity in (True, False):
        part = [g for g in group if g.even == parity]
        state, up, rest = _halve(state, part, nu)
        raised.extend(up)
        left.extend(rest)
    return state, raised, left


def correct_parity(
    state: ContractionState, low: ContractionClass, high: ContractionClass
) -> tuple[ContractionState, ContractionClass]:
    """S_(nu, o), S_(mu, o) -> S_(nu, e) for nu < mu."""
    if low.niveau >= high.niveau:
        low, high = high, low
    state = merge(
        state, low, high, rule="PC", at_least=int(low.niveau), exact=True
    )
    return state, state.classes[-1]


def _prims(state: ContractionState, nu: int) -> list[ContractionClass]:
    return state.select(primary=True, at_least=nu, even=True)


def _secs(
    state: ContractionState, nu: int, even: bool | None = None
) -> list[ContractionClass]:
    return state.select(primary=False, niveau=nu, even=even)


def _secs_range(
    state: ContractionState, lo: int, hi: int, even: bool | None = None
) -> list[ContractionClass]:
    out = [
        c
        for c in state.select(primary=False, even=even)
        if lo <= c.niveau <= hi
    ]
    return sorted(out, key=lambda c: c.key)


def _pick(
    prims: Sequence[ContractionClass],
    secs: Sequence[ContractionClass],
    total: int,
    min_prims: int,
) -> list[ContractionClass]:
    chosen = list(prims[:total])
    if len(chosen) < min_prims:
        msg = f"need {min_prims} primary classes, have {len(chosen)}"
        raise ScheduleError(msg)
    chosen.extend(secs[: total - len(chosen)])
    if len(chosen) < total:
        msg = f"need {total} classes, have {len(chosen)}"
        raise ScheduleError(msg)
    return chosen


def _log2(n: int) -> int:
    if n < 1 or n & (n - 1):
        msg = f"{n} is not a power of two"
        raise InternalError(msg)
    return n.bit_length() - 1


def _even_step(
    state: ContractionState,
    prims: Sequence[ContractionClass],
    secs: Sequence[ContractionClass],
    nu: int,
) -> tuple[
    ContractionState,
    list[ContractionClass],
    list[ContractionClass],
    list[ContractionClass],
]:
    """One niveau of even contraction.

    Secondaries pair up until at most two are left, each leftover joins a
    primary, the remaining primaries pair up. Returns the new primaries,
    the new secondaries (both at niveau nu + 1) and any primary left over.
    """
    state, raised, left = _halve(state, secs, nu)
    pool = list(prims)
    if len(left) > len(pool):
        msg = f"{len(left)} secondaries left for {len(pool)} primaries"
        raise ScheduleError(msg)
    promoted: list[ContractionClass] = []
    for sec in left:
        state, new = _join(state, [pool.pop(0), sec], "P+S", nu + 1)
        promoted.append(new)
    while len(pool) >= 2:
        state, new = _join(state, pool[:2], "2P", nu + 1)
        promoted.append(new)
        pool = pool[2:]
    return state, promoted, raised, pool


@jaxtyped(typechecker=beartype)
def contract_even_block(
    state: ContractionState,
    classes: Sequence[ContractionClass],
    nu: int,
    l: int,  # noqa: E741
) -> tuple[ContractionState, ContractionClass]:
    """2^l even classes at niveau nu, one primary, to one P_(nu+l, e).

    Primaries may sit at any niveau >= nu; secondaries at exactly nu.
    """
    prims = [c for c in classes if c.primary]
    secs = [c for c in classes if not c.primary]
    if len(classes) != 2**l or not prims:
        msg = f"even block needs 2^{l} classes with a primary"
        raise ScheduleError(msg)
    for level in range(nu, nu + l):
        state, prims, secs, rest = _even_step(state, prims, secs, level)
        if rest:
            msg = f"even block left {len(rest)} primaries at niveau {level}"
            raise RuleViolation(msg)
    if len(prims) != 1 or secs:
        msg = "even block did not end in a single primary"
        raise RuleViolation(msg)
    return state, prims[0]


@jaxtyped(typechecker=beartype)
def contract_seeded(
    state: ContractionState,
    classes: Sequence[ContractionClass],
    nu: int,
    l: int,  # noqa: E741
) -> tuple[ContractionState, ContractionClass]:
    """2^(l+1) even classes P_nu, S_nu .. S_(nu+l), at least 2^l primary,
    to one P_(nu+l+1, e).
    """
    prims = sorted((c for c in classes if c.primary), key=lambda c: c.key)
    secs = sorted((c for c in classes if not c.primary), key=lambda c: c.key)
    if len(classes) != 2 ** (l + 1) or len(prims) < 2**l:
        msg = f"seeded block needs 2^{l + 1} classes, 2^{l} primary"
        raise ScheduleError(msg)
    if l == 0:
        return contract_even_block(state, classes, nu, 1)
    top = [c for c in secs if c.niveau == nu + l]
    if top:
        state, head = contract_even_block(state, prims[: 2**l], nu, l)
        return _join(state, [head, top[0]], "P+S", nu + l + 1)
    half = 2 ** (l - 1)
    first, second = list(prims[:half]), list(prims[half : 2 * half])
    for extra in [*prims[2 * half :], *secs]:
        (first if len(first) < 2**l else second).append(extra)
    state, p1 = contract_seeded(state, first, nu, l - 1)
    state, p2 = contract_seeded(state, second, nu, l - 1)
    return _join(state, [p1, p2], "2P", nu + l + 1)


@jaxtyped(typechecker=beartype)
def contract_two_primary(
    state: ContractionState,
    classes: Sequence[ContractionClass],
    nu: int,
    l: int,  # noqa: E741
) -> tuple[ContractionState, ContractionClass]:
    """2^l + 2 classes P_(nu, e), S_(nu, e), S_(nu, o), two primary,
    to one P_(nu+l, e).
    """
    prims = sorted((c for c in classes if c.primary), key=lambda c: c.key)
    secs = [c for c in classes if not c.primary]
    if len(classes) != 2**l + 2 or len(prims) < 2:
        msg = f"two-primary block needs 2^{l} + 2 classes, two primary"
        raise ScheduleError(msg)
    if l == 1:
        return _join(state, prims[:2], "2P", nu + 1)
    state, raised, left = _halve_by_parity(state, secs, nu)
    left_even = [c for c in left if c.even]
    state, promoted, _, _ = _even_step(state, prims, left_even, nu)
    pool = _pick(
        sorted(promoted, key=lambda c: c.key),
        sorted(raised, key=lambda c: c.key),
        2 ** (l - 1),
        1,
    )
    return contract_even_block(state, pool, nu + 1, l - 1)


def _odd_pairs(
    state: ContractionState,
    leftover: dict[int, list[ContractionClass]],
    nu: int,
    l: int,  # noqa: E741
) -> tuple[ContractionState, list[ContractionClass]]:
    """Parity-correct the odd leftovers above nu in disjoint pairs."""
    evens: list[ContractionClass] = []

    def fix(
        st: ContractionState, i: int, j: int
    ) -> ContractionState:
        st, new = correct_parity(st, leftover[i].pop(0), leftover[j].pop(0))
        evens.append(new)
        return st

    twos = [j for j in range(nu + 1, nu + l) if len(leftover[j]) == 2]
    ones = [j for j in range(nu + 1, nu + l) if len(leftover[j]) == 1]
    while len(twos) >= 2:
        j1, j2 = twos.pop(0), twos.pop(0)
        state = fix(state, j1, j2)
        state = fix(state, j1, j2)
    j0 = twos[0] if twos else None
    if len(ones) >= 2:
        if j0 is not None:
            for j in ones[:2]:
                state = fix(state, j, j0)
            ones = ones[2:]
        while len(ones) >= 2:
            j3, j4 = ones.pop(0), ones.pop(0)
            state = fix(state, j3, j4)
    elif len(ones) == 1 and j0 is not None:
        state = fix(state, ones[0], j0)
    return state, evens


@jaxtyped(typechecker=beartype)
def contract_scattered(
    state: ContractionState,
    classes: Sequence[ContractionClass],
    nu: int,
    l: int,  # noqa: E741
) -> tuple[ContractionState, ContractionClass]:
    """2^(l+1) + 2 classes P_nu, S_nu .. S_(nu+l-1) of either parity, at
    least 2^l primary, to one P_(nu+l+1, e).

    Odd secondaries are contracted to even ones at higher niveau, after
    which the seeded contraction applies one niveau up.
    """
    prims = sorted((c for c in classes if c.primary), key=lambda c: c.key)
    secs = [c for c in classes if not c.primary]
    if len(classes) != 2 ** (l + 1) + 2 or len(prims) < 2**l:
        msg = f"scattered block needs 2^{l + 1} + 2 classes, 2^{l} primary"
        raise ScheduleError(msg)
    if l == 1:
        return contract_two_primary(state, classes, nu, 2)
    evens = [c for c in secs if c.even]
    leftover: dict[int, list[ContractionClass]] = {}
    for j in range(nu, nu + l):
        odd_j = [c for c in secs if not c.even and c.niveau == j]
        state, raised, leftover[j] = _halve(state, odd_j, j)
        evens.extend(raised)
    state, fixed = _odd_pairs(state, leftover, nu, l)
    evens.extend(fixed)
    rest = [c for j in range(nu, nu + l) for c in leftover[j]]
    kappa = len(rest)
    low = [c for c in rest if c.niveau == nu]
    high = [c for c in rest if c.niveau > nu]
    if kappa == 4:
        if len(low) != len(high):
            msg = f"odd leftovers {[c.tag for c in rest]} do not pair up"
            raise ScheduleError(msg)
        for x, y in zip(low, high, strict=True):
            state, new = correct_parity(state, x, y)
            evens.append(new)
        low, high = [], []
    at_nu = [c for c in evens if c.niveau == nu]
    above = [c for c in evens if c.niveau > nu]
    state, promoted, raised, spare = _even_step(state, prims, at_nu, nu)
    if kappa == 3 and spare and low and high:
        state, new = _join(state, [spare[0], low[0], high[0]], "P+2So", nu + 1)
        promoted.append(new)
    pool = _pick(
        sorted(promoted, key=lambda c: c.key),
        sorted([*raised, *above], key=lambda c: c.key),
        2**l,
        2 ** (l - 1),
    )
    return contract_seeded(state, pool, nu + 1, l - 1)


@jaxtyped(typechecker=beartype)
def pair_level_zero(state: ContractionState) -> ContractionState:
    """Pair the niveau-0 primaries of equal parity into P_(1, e)."""
    for parity in (True, False):
        group = state.select(primary=True, niveau=0, even=parity)
        while len(group) >= 2:
            state = merge(state, group[0], group[1], rule="2P0", at_least=1)
            group = group[2:]
    return state


@jaxtyped(typechecker=beartype)
def absorb_level_zero_pair(
    state: ContractionState, niveaux: Sequence[int] | None = None
) -> ContractionState:
    """P_(0, e), P_(0, o), S_(j, o) -> P_(1, e) for some j >= 1.

    The odd secondary is taken at the first of `niveaux` that has one
    (default: the smallest niveau >= 1). Leaves the state unchanged when
    no such triple exists.
    """
    pe = state.select(primary=True, niveau=0, even=True)
    po = state.select(primary=True, niveau=0, even=False)
    odd = [c for c in state.select(primary=False, even=False) if c.niveau >= 1]
    if niveaux is not None:
        odd = [
            c
            for j in niveaux
            for c in odd
            if c.niveau == j
        ]
    if not (pe and po and odd):
        logger.debug("no level-zero pair to absorb")
        return state
    return merge(state, pe[0], po[0], odd[0], rule="P0+P0+So", at_least=1)


def _ladder(
    state: ContractionState,
    prims: Sequence[ContractionClass],
    nu: int,
    l: int,  # noqa: E741
) -> tuple[ContractionState, list[ContractionClass]]:
    """Contract consecutive groups of 2^l primaries, one class per group."""
    size = 2**l
    if len(prims) % size:
        msg = f"{len(prims)} primaries do not split into groups of {size}"
        raise ScheduleError(msg)
    out: list[ContractionClass] = []
    for start in range(0, len(prims), size):
        state, new = contract_even_block(
            state, prims[start : start + size], nu, l
        )
        out.append(new)
    return state, out


def _group_up(
    state: ContractionState,
    prims: Sequence[ContractionClass],
    secs: Sequence[ContractionClass],
    nu: int,
    l: int,  # noqa: E741
) -> tuple[ContractionState, list[ContractionClass]]:
    """One primary plus 2^l - 1 secondaries per group."""
    per = 2**l - 1
    if len(secs) < per * len(prims):
        msg = f"{len(prims)} groups need {per * len(prims)} secondaries"
        raise ScheduleError(msg)
    out: list[ContractionClass] = []
    for n, prim in enumerate(prims):
        group = [prim, *secs[n * per : (n + 1) * per]]
        state, new = contract_even_block(state, group, nu, l)
        out.append(new)
    return state, out


def _finish(
    state: ContractionState, prims: Sequence[ContractionClass], nu: int
) -> ContractionState:
    if len(prims) > 1:
        state, _ = contract_even_block(state, prims, nu, _log2(len(prims)))
    return state


def _level_zero_count(state: ContractionState) -> int:
    return sum(1 for a in state.system.a if a % 2)


def _schedule_type_a(state: ContractionState) -> ContractionState:
    ctx = state.ctx
    k, tau = ctx.k, state.target - 2
    u0 = _level_zero_count(state)
    pinned = state.select(primary=True, niveau=0, even=False)
    if not pinned:
        msg = "type A system without an odd-b variable at niveau 0"
        raise ScheduleError(msg)
    state = drop(state, pinned[0])
    state = pair_level_zero(state)
    p1 = _prims(state, 1)
    if u0 >= 4 * k + 2:
        logger.debug("type A: wide level zero")
        state, _ = contract_seeded(state, _pick(p1, [], 2 * k, k), 1, tau)
        return state
    if k >= 8 and u0 >= 2 * k + 2:
        logger.debug("type A: level zero with secondaries up to tau + 1")
        secs = _secs_range(state, 1, tau + 1, even=True)
        state, _ = contract_seeded(state, _pick(p1, secs, 2 * k, k), 1, tau)
        return state
    if k >= 8 and u0 >= k + 2:
        return _type_a_middle(state, p1[: k // 2])
    if u0 == k + 1:
        return _type_a_tight(state, p1)
    if k == 4:
        return _type_a_quartic(state, p1)
    msg = f"no type A case for k={k}, level-zero count {u0}"
    raise ScheduleError(msg)


def _type_a_middle(
    state: ContractionState, p1: Sequence[ContractionClass]
) -> ContractionState:
    k, tau = state.ctx.k, state.target - 2
    logger.debug("type A: middle level zero")
    s3 = _secs(state, 3, even=True)
    if len(s3) >= 3 * k // 8:
        state, p3s = _ladder(state, p1, 1, 2)
        fives: list[ContractionClass] = []
        for n, p3 in enumerate(p3s):
            state, p5 = contract_even_block(
                state, [p3, *s3[3 * n : 3 * n + 3]], 3, 2
            )
            fives.append(p5)
        return _finish(state, fives, 5)
    state, p2s = _ladder(state, p1, 1, 1)
    state, _, _ = _halve(state, _secs(state, 1, even=True), 1)
    state, fours = _group_up(state, p2s, _secs(state, 2, even=True), 2, 2)
    if len(fours) != 2 ** (tau - 2):
        msg = f"expected {2 ** (tau - 2)} classes at niveau 4"
        raise ScheduleError(msg)
    return _finish(state, fours, 4)


def _type_a_tight(
    state: ContractionState, p1: Sequence[ContractionClass]
) -> ContractionState:
    k = state.ctx.k
    half = k // 2
    logger.debug("type A: level zero of size k + 1")
    p1 = list(p1[: half - 1])
    s1 = _secs(state, 1, even=True)
    keep = half if len(s1) % 2 == 0 else half - 1
    state, _, left = _halve(state, s1, 1, keep=keep)
    if len(left) < len(p1):
        msg = f"{len(left)} secondaries at niveau 1 for {len(p1)} primaries"
        raise ScheduleError(msg)
    p2s: list[ContractionClass] = []
    for prim, sec in zip(p1, left, strict=False):
        state, new = _join(state, [prim, sec], "P+S", 2)
        p2s.append(new)
    state, fours = _group_up(
        state, p2s[: k // 4], _secs(state, 2, even=True), 2, 2
    )
    return _finish(state, fours, 4)


def _type_a_quartic(
    state: ContractionState, p1: Sequence[ContractionClass]
) -> ContractionState:
    logger.debug("type A: k = 4 with a small level zero")
    state, p2s, _, _ = _even_step(state, p1, _secs(state, 1, even=True), 1)
    s2 = _secs(state, 2, even=True)
    s3 = _secs(state, 3, even=True)
    if s3:
        if s2:
            state, p3 = _join(state, [p2s[0], s2[0]], "P+S", 3)
        else:
            state, p3 = _join(state, p2s[:2], "2P", 3)
        state, _ = _join(state, [p3, s3[0]], "P+S", 4)
        return state
    state, _ = contract_even_block(state, _pick(p2s, s2, 4, 1), 2, 2)
    return state


def _schedule_type_b(state: ContractionState) -> ContractionState:
    k, tau = state.ctx.k, state.target - 2
    u0 = _level_zero_count(state)
    state = pair_level_zero(state)
    if u0 >= 4 * k:
        logger.debug("type B: wide level zero")
        if len(_prims(state, 1)) < 2 * k:
            state = absorb_level_zero_pair(state)
        picked = _pick(_prims(state, 1), [], 2 * k, 2 * k)
        state, _ = contract_even_block(state, picked, 1, tau + 1)
        return state
    if k == 4:
        return _schedule_quartic(state, u0)
    if u0 > 2 * k:
        if k >= 16:
            logger.debug("type B: scattered secondaries up to tau")
            secs = _secs_range(state, 1, tau)
            picked = _pick(_prims(state, 1), secs, 2 * k + 2, k)
            state, _ = contract_scattered(state, picked, 1, tau)
            return state
        return _octic_wide(state)
    return _type_b_narrow(state)


def _octic_wide(state: ContractionState) -> ContractionState:
    logger.debug("type B: k = 8 with a wide level zero")
    p1 = _prims(state, 1)
    s123 = _secs_range(state, 1, 3)
    if len(p1) + len(s123) >= 18:
        state, _ = contract_scattered(state, _pick(p1, s123, 18, 8), 1, 3)
        return state
    s4e = _secs(state, 4, even=True)
    if s4e:
        state, p4 = contract_even_block(state, p1[:8], 1, 3)
        state, _ = _join(state, [p4, s4e[0]], "P+S", 5)
        return state
    donors = _secs(state, 4, even=False)
    evens = [c for c in s123 if c.even]
    for odd in (c for c in s123 if not c.even):
        if not donors:
            msg = "ran out of odd niveau-4 classes for parity correction"
            raise ScheduleError(msg)
        state, new = correct_parity(state, odd, donors.pop(0))
        evens.append(new)
    state, _ = contract_seeded(state, _pick(p1, evens, 16, 8), 1, 3)
    return state


def _type_b_narrow(state: ContractionState) -> ContractionState:
    k, tau = state.ctx.k, state.target - 2
    logger.debug("type B: narrow level zero")
    p1 = _pick(_prims(state, 1), [], k // 2, k // 2)
    s1 = _secs(state, 1)
    if len(s1) >= 3 * k // 2 + 2:
        picked = [*p1, *s1[: 3 * k // 2 + 2]]
        state, _ = contract_two_primary(state, picked, 1, tau + 1)
        return state
    state, _, _ = _halve(state, s1, 1, same_parity=False)
    state, p2s = _ladder(state, p1, 1, 1)
    s2 = _secs(state, 2)
    if len(s2) >= 3 * k // 4 + 2:
        picked = [*p2s, *s2[: 3 * k // 4 + 2]]
        state, _ = contract_two_primary(state, picked, 2, tau)
        return state
    if k >= 16:
        state, p3s = _ladder(state, p2s, 2, 1)
        state, _, _ = _halve(state, s2, 2, same_parity=False)
        s3 = _secs(state, 3)
        if len(s3) >= 3 * k // 8 + 2:
            picked = [*p3s, *s3[: 3 * k // 8 + 2]]
            state, _ = contract_two_primary(state, picked, 3, tau - 1)
            return state
        msg = f"too few niveau-3 secondaries ({len(s3)}) for k={k}"
        raise ScheduleError(msg)
    return _octic_narrow(state, p2s, s2)


def _octic_narrow(
    state: ContractionState,
    p2s: Sequence[ContractionClass],
    s2: Sequence[ContractionClass],
) -> ContractionState:
    s2e = [c for c in s2 if c.even]
    s2o = [c for c in s2 if not c.even]
    group = s2e if len(s2e) >= 3 else s2o if len(s2o) >= 3 else None
    if group is not None:
        state, s3_new, _ = _pair_matching(state, group, 2)
        state, _, _ = _halve(state, _secs(state, 2), 2, same_parity=False)
        state, p3 = _join(state, list(p2s[:2]), "2P", 3)
        s3e = _secs(state, 3, even=True)
        if len(s3e) >= 3:
            state, _ = contract_even_block(state, [p3, *s3e[:3]], 3, 2)
            return state
        state, s4e, _ = _pair_matching(state, _secs(state, 3, even=False), 3)
        state, p4 = _join(state, [p3, s3_new], "P+S", 4)
        state, _ = _join(state, [p4, s4e], "P+S", 5)
        return state
    state, p4 = contract_even_block(state, [*p2s[:2], *s2e[:2]], 2, 2)
    twin = _twin(_secs(state, 3), same_parity=True)
    if twin is None:
        msg = "no same-parity pair at niveau 3"
        raise ScheduleError(msg)
    state = merge(state, *twin, rule="3S", at_least=4, exact=True)
    state, _ = _join(state, [p4, state.classes[-1]], "P+S", 5)
    return state


def _even_secondary(
    state: ContractionState, lo: int, hi: int
) -> tuple[ContractionState, ContractionClass]:
    """An even secondary at niveau lo .. hi, built if necessary."""
    evens = _secs_range(state, lo, hi, even=True)
    if evens:
        return state, evens[0]
    odds = _secs_range(state, lo, hi, even=False)
    levels = sorted({int(c.niveau) for c in odds})
    if len(levels) >= 2:
        low = next(c for c in odds if c.niveau == levels[0])
        high = next(c for c in odds if c.niveau == levels[1])
        return correct_parity(state, low, high)
    for j in levels:
        group = [c for c in odds if c.niveau == j]
        if j < hi and len(group) >= 3:
            state, new, _ = _pair_matching(state, group, j)
            return state, new
    msg = f"no even secondary obtainable at niveau {lo}..{hi}"
    raise ScheduleError(msg)


def _ensure_even_low(
    state: ContractionState,
    count: int,
    donors: Sequence[ContractionClass],
) -> tuple[ContractionState, list[ContractionClass]]:
    """`count` even classes at niveau 1, correcting odd ones with donors."""
    s1e = _secs(state, 1, even=True)
    s1o = _secs(state, 1, even=False)
    pool = list(donors)
    while len(s1e) < count:
        if not s1o or not pool:
            msg = f"cannot make {count} even classes at niveau 1"
            raise ScheduleError(msg)
        state, new = correct_parity(state, s1o.pop(0), pool.pop(0))
        s1e.append(new)
    return state, s1e[:count]


def _twin_from_majority(
    state: ContractionState, nu: int
) -> tuple[ContractionState, ContractionClass]:
    """Pair two secondaries of the more frequent parity at niveau nu."""
    for parity in (True, False):
        group = _secs(state, nu, even=parity)
        if len(group) >= 3:
            state, new, _ = _pair_matching(state, group, nu)
            return state, new
    msg = f"no parity occurs three times at niveau {nu}"
    raise ScheduleError(msg)


def _two_p1_three_s2(
    state: ContractionState,
    p1: Sequence[ContractionClass],
    s2e: Sequence[ContractionClass],
) -> ContractionState:
    """2 P_1, 3 S_(2, e) -> P_2, 3 S_(2, e) -> P_4."""
    state, p2 = _join(state, list(p1[:2]), "2P", 2)
    state, _ = contract_even_block(state, [p2, *s2e[:3]], 2, 2)
    return state


def _two_p1_with_tops(
    state: ContractionState,
    p1: Sequence[ContractionClass],
    s2e: ContractionClass,
    s3e: ContractionClass,
) -> ContractionState:
    """2 P_1, S_(2, e), S_(3, e) -> P_4."""
    state, p2 = _join(state, list(p1[:2]), "2P", 2)
    state, p3 = _join(state, [p2, s2e], "P+S", 3)
    state, _ = _join(state, [p3, s3e], "P+S", 4)
    return state


def _schedule_quartic(state: ContractionState, u0: int) -> ContractionState:
    s3 = _secs(state, 3)
    s3e = [c for c in s3 if c.even]
    if s3e:
        return _quartic_even_top(state, u0, s3e[0])
    if len(s3) >= 3:
        msg = f"{len(s3)} odd classes at niveau 3"
        raise NeedsCycling(msg)
    return _quartic_low_top(state, u0)


def _quartic_even_top(
    state: ContractionState, u0: int, top: ContractionClass
) -> ContractionState:
    logger.debug("type B, k = 4: an even class at niveau 3")
    p1 = _prims(state, 1)
    if u0 >= 8:
        if len(p1) < 4:
            state = absorb_level_zero_pair(state)
        picked = _pick(_prims(state, 1), [], 4, 4)
        state, p3 = contract_even_block(state, picked, 1, 2)
    else:
        s1 = _secs(state, 1)
        if len(s1) >= 4:
            picked = _pick(p1[:2], s1, 6, 2)
            state, p3 = contract_two_primary(state, picked, 1, 2)
        else:
            s2e = _secs(state, 2, even=True)
            if s2e:
                state, p2 = _join(state, p1[:2], "2P", 2)
                state, p3 = _join(state, [p2, s2e[0]], "P+S", 3)
            else:
                state, s1e = _ensure_even_low(
                    state, 2, _secs(state, 2, even=False)
                )
                state, p3 = contract_even_block(
                    state, [*p1[:2], *s1e], 1, 2
                )
    state, _ = _join(state, [p3, top], "P+S", 4)
    return state


def _quartic_low_top(state: ContractionState, u0: int) -> ContractionState:
    logger.debug(f"type B, k = 4: at most two odd classes at niveau 3, {u0=}")
    if u0 >= 14:
        if len(_prims(state, 1)) < 7:
            state = absorb_level_zero_pair(state)
        p1 = _prims(state, 1)
        state, extra = _even_secondary(state, 1, 3)
        state, _ = contract_seeded(state, _pick(p1[:7], [extra], 8, 4), 1, 2)
        return state
    if u0 >= 8:
        if u0 % 2 == 0 and len(_prims(state, 1)) < u0 // 2:
            state = absorb_level_zero_pair(state, niveaux=(3, 1, 2))
        p1 = _prims(state, 1)
        s12 = _secs_range(state, 1, 2)
        if len(p1) >= 4 and len(p1) + len(s12) >= 10:
            picked = _pick(p1, s12, 10, 4)
            state, _ = contract_scattered(state, picked, 1, 2)
            return state
        evens = [c for c in s12 if c.even]
        odds = [c for c in s12 if not c.even]
        donors = _secs(state, 3, even=False)
        while len(evens) < 2 and odds and donors:
            state, new = correct_parity(state, odds.pop(0), donors.pop(0))
            evens.append(new)
        state, _ = contract_seeded(state, _pick(p1, evens, 8, 4), 1, 2)
        return state
    if u0 == 7:
        return _quartic_seven(state)
    if u0 == 6:
        return _quartic_six(state)
    return _quartic_five(state)


def _quartic_seven(state: ContractionState) -> ContractionState:
    p1 = _prims(state, 1)
    s1 = _secs(state, 1)
    if len(s1) >= 7:
        state, _ = contract_two_primary(state, _pick(p1[:3], s1, 10, 2), 1, 3)
        return state
    s2e = _secs(state, 2, even=True)
    s2o = _secs(state, 2, even=False)
    if len(s2e) >= 3:
        return _two_p1_three_s2(state, p1, s2e)
    if len(s2o) >= 3:
        state, s3e, rest = _pair_matching(state, s2o, 2)
        state, s1e = _ensure_even_low(state, 1, rest)
        state, p3 = contract_even_block(state, [*p1[:3], *s1e], 1, 2)
        state, _ = _join(state, [p3, s3e], "P+S", 4)
        return state
    if len(s2e) < 2:
        state, new = _twin_from_majority(state, 1)
        s2e = [*s2e, new]
    state, s1e = _ensure_even_low(state, 1, s2o)
    state, p2a = _join(state, [p1[0], s1e[0]], "P+S", 2)
    state, p2b = _join(state, [p1[1], p1[2]], "2P", 2)
    state, _ = contract_even_block(state, [p2a, p2b, *s2e[:2]], 2, 2)
    return state


def _quartic_six(state: ContractionState) -> ContractionState:
    p1 = _prims(state, 1)
    s1 = _secs(state, 1)
    if len(s1) >= 8:
        state, _ = contract_two_primary(state, _pick(p1[:2], s1, 10, 2), 1, 3)
        return state
    if len(s1) == 7:
        if len(p1) < 3:
            state = absorb_level_zero_pair(state, niveaux=(2, 3))
            p1 = _prims(state, 1)
        if len(p1) >= 3:
            picked = _pick(p1[:3], s1, 10, 2)
            state, _ = contract_two_primary(state, picked, 1, 3)
            return state
        return _two_p1_three_s2(state, p1, _secs(state, 2, even=True))
    s2e = _secs(state, 2, even=True)
    s2o = _secs(state, 2, even=False)
    if len(s2e) >= 3:
        return _two_p1_three_s2(state, p1, s2e)
    if len(s2o) >= 3:
        state, s3e, _ = _pair_matching(state, s2o, 2)
        if len(p1) < 3:
            state = absorb_level_zero_pair(state, niveaux=(2,))
            p1 = _prims(state, 1)
        s1e = _secs(state, 1, even=True)
        if s1e and len(p1) >= 3:
            state, p3 = contract_even_block(state, [*p1[:3], s1e[0]], 1, 2)
            state, _ = _join(state, [p3, s3e], "P+S", 4)
            return state
        state, s2_new = _twin_from_majority(state, 1)
        return _two_p1_with_tops(state, p1, s2_new, s3e)
    state, s2_new = _twin_from_majority(state, 1)
    return _two_p1_three_s2(state, p1, [*s2e, s2_new])


def _quartic_five(state: ContractionState) -> ContractionState:
    p1 = _prims(state, 1)
    s1 = _secs(state, 1)
    if len(s1) >= 8:
        state, _ = contract_two_primary(state, _pick(p1[:2], s1, 10, 2), 1, 3)
        return state
    s2e = _secs(state, 2, even=True)
    s2o = _secs(state, 2, even=False)
    if len(s2e) >= 3:
        return _two_p1_three_s2(state, p1, s2e)
    if len(s2o) >= 3:
        state, s3e, _ = _pair_matching(state, s2o, 2)
        s1e = _secs(state, 1, even=True)
        if len(s1e) >= 2:
            state, p3 = contract_even_block(state, [*p1[:2], *s1e[:2]], 1, 2)
            state, _ = _join(state, [p3, s3e], "P+S", 4)
            return state
        state, s2_new = _twin_from_majority(state, 1)
        return _two_p1_with_tops(state, p1, s2_new, s3e)
    state, s1e = _ensure_even_low(state, 2, s2o)
    state, p2a = _join(state, [p1[0], s1e[0]], "P+S", 2)
    state, p2b = _join(state, [p1[1], s1e[1]], "P+S", 2)
    state, _ = contract_even_block(state, [p2a, p2b, *s2e[:2]], 2, 2)
    return state


@jaxtyped(typechecker=beartype)
def schedule(state: ContractionState) -> ContractionState:
    """Run the contraction schedule for the system type of `state`.

    Raises:
        NeedsCycling: k = 4, type B, three or more odd niveau-3 classes
            and no even one.
        ScheduleError: A case ran out of classes.
        RuleViolation: A contraction missed its promised gain.

    """
    kind = stats(state.system, state.ctx).type
    if kind == SystemType.A:
        state = _schedule_type_a(state)
    else:
        state = _schedule_type_b(state)
    goal = state.goal
    if goal is None or not state.covers():
        msg = "schedule finished without a primary even class at the target"
        raise ScheduleError(msg)
    logger.debug(f"schedule reached {goal.tag} from {goal.provenance}")
    return state


def realize(state: ContractionState) -> list[int]:
    """Goal class members set to 1, everything else 0."""
    goal = state.goal
    if goal is None:
        msg = "no goal class to realize"
        raise InternalError(msg)
    members = set(goal.members)
    return [1 if i in members else 0 for i in range(state.system.s)]


@jaxtyped(typechecker=beartype)
def search_zero_one(
    system: DiagLinSystem,
    ctx: PadicContext,
    exclude: Sequence[int] = (),
) -> list[int] | None:
    """0/1 point with sum a x = 0 mod 2^gamma, sum b x even, and an odd-a
    coordinate set to 1.

    A sumset over (residue, parity, odd-a hit) with back-pointers, the
    same shape every contraction schedule produces.
    """
    _, gamma = ctx.require_tau()
    q = 2**gamma
    State = tuple[int, int, bool]
    start: State = (0, 0, False)
    back: dict[State, tuple[State, int] | None] = {start: None}
    goal: State = (0, 0, True)
    for i in range(system.s):
        if i in exclude:
            continue
        a, b = system.a[i], system.b[i]
        for r, par, hit in list(back):
            nxt = ((r + a) % q, (par + b) % 2, hit or a % 2 == 1)
            if nxt not in back:
                back[nxt] = ((r, par, hit), i)
        if goal in back:
            break
    if goal not in back:
        return None
    point = [0] * system.s
    cur = goal
    while back[cur] is not None:
        prev, idx = back[cur]  # type: ignore[misc]
        point[idx] = 1
        cur = prev
    return point


def _check_frame(system: DiagLinSystem, ctx: PadicContext) -> None:
    if ctx.p != 2 or ctx.k not in DEGREES:
        msg = f"the p = 2 engine covers k in {DEGREES}, got p={ctx.p}, k={ctx.k}"
        raise NotApplicable(msg)
    if system.s < ctx.k**2 + 2:
        msg = f"need s >= k^2 + 2 = {ctx.k**2 + 2}, got {system.s}"
        raise NotApplicable(msg)


def needs_cycling(system: DiagLinSystem, ctx: PadicContext) -> bool:
    """k = 4, type B, >= 3 variables at niveau 3, all with odd b."""
    if ctx.p != 2 or ctx.k != 4:
        return False
    st = stats(system, ctx)
    top = [i for i, v in enumerate(st.nu) if v == 3]
    return (
        st.type == SystemType.B
        and len(top) >= 3
        and all(system.b[i] % 2 for i in top)
    )


@jaxtyped(typechecker=beartype)
def cycle(transcript: Transcript, ctx: PadicContext) -> Transcript:
    """x -> 2x on niveaux 0..2, diagonal form divided by 8.

    Niveau 3 becomes niveau 0 (odd, primary); niveau j < 3 becomes j + 1
    with an even linear coefficient.
    """
    nu = stats(transcript.system, ctx).nu
    mults = [2 if v < 3 else 1 for v in nu]
    return transcript.then(
        scaling_step(mults, scale_a=Fraction(1, 8), label="cycle")
    )


@jaxtyped(typechecker=beartype)
def cycling_solve(transcript: Transcript, ctx: PadicContext) -> EngineResult:
    """Solve a k = 4 type B system whose niveau-3 variables are all odd.

    Raises:
        NotApplicable: The system does not qualify.
        ScheduleError: The cycled system ran out of classes.

    """
    if not needs_cycling(transcript.system, ctx):
        msg = "cycling needs k = 4, type B and three odd niveau-3 variables"
        raise NotApplicable(msg)
    cycled = cycle(transcript, ctx)
    state = initial_state(cycled.system, ctx)
    tops = state.select(primary=True, niveau=0, even=False)
    state = merge(state, tops[0], tops[1], rule="2P0", at_least=1)
    p1 = state.classes[-1]
    s1 = _secs(state, 1, even=True)
    if len(s1) >= 7:
        logger.debug("cycling: P1 with seven S1")
        state, _ = contract_even_block(state, [p1, *s1[:7]], 1, 3)
    else:
        logger.debug("cycling: P1, S1 and three S2")
        state, _, rest = _pair_matching(state, s1, 1)
        state, p2 = _join(state, [p1, rest[0]], "P+S", 2)
        s2 = _secs(state, 2, even=True)
        state, _ = contract_even_block(state, [p2, *s2[:3]], 2, 2)
    if state.goal is None:
        msg = "cycled schedule did not reach niveau 4"
        raise ScheduleError(msg)
    result = witness_at(
        EngineTag.POW2, cycled, ctx, realize(state), "cycling"
    )
    if result is None:
        msg = "cycled contraction gave no witness"
        raise InternalError(msg)
    return result


def _fallback(transcript: Transcript, ctx: PadicContext) -> EngineResult:
    system = transcript.system
    exclude: list[int] = []
    if stats(system, ctx).type == SystemType.A:
        pairs = zip(system.a, system.b, strict=True)
        odd = [i for i, (a, b) in enumerate(pairs) if a % 2 and b % 2]
        exclude = odd[:1]
    point = search_zero_one(system, ctx, exclude)
    result = None
    if point is not None:
        result = witness_at(
            EngineTag.POW2, transcript, ctx, point, "zero-one-search"
        )
    if result is None:
        return unresolved(
            EngineTag.POW2,
            transcript,
            "zero-one-search",
            "no 0/1 point with an odd pivot minor",
        )
    return result


@jaxtyped(typechecker=beartype)
def solve_pow2(transcript: Transcript, ctx: PadicContext) -> EngineResult:
    """Contract to a primary even class at niveau tau + 2 and certify."""
    system = transcript.system
    try:
        _check_frame(system, ctx)
    except NotApplicable as exc:
        return unresolved(EngineTag.POW2, transcript, "frame", str(exc))
    kind = stats(system, ctx).type
    route = f"type-{kind.value}"
    try:
        state = schedule(initial_state(system, ctx))
        result = witness_at(
            EngineTag.POW2, transcript, ctx, realize(state), route
        )
        if result is None:
            msg = "contracted point failed its witness check"
            raise InternalError(msg)
    except NeedsCycling as exc:
        logger.info(f"switching to the cycling transform: {exc}")
        try:
            result = cycling_solve(transcript, ctx)
        except (ScheduleError, InternalError) as err:
            logger.warning(f"cycling failed ({err}); searching 0/1 points")
            result = _fallback(transcript, ctx)
    except (ScheduleError, InternalError) as exc:
        logger.warning(f"{route} schedule failed ({exc}); searching 0/1 points")
        result = _fallback(transcript, ctx)
    if result.resolved:
        logger.info(f"p = 2 engine solved by route {result.route}")
    return result
