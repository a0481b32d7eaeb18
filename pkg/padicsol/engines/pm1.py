"""The k = p - 1 engine.

A conditioned system with at least k^2 + 2 variables either gives up a
non-singular solution modulo p through one of the reduction shortcuts, or
is carried to a critical system: a header pair (x_1, x_2) with b = (1, -1)
and a_1 = -a_2 mod p, followed by k blocks of k variables, block j holding
the variables with v_p(a_i) = j.

Critical systems are solved by pinning the header pair to integers
(X_1, X_2) and solving what is left on a single block. The pinning is a
grouping step x_1 -> X_1 w, x_2 -> X_2 w followed by division of both
equations by p^level, so every route ends in an ordinary witness on a
derived system of the transcript.
"""

from collections.abc import Sequence
from fractions import Fraction

from beartype import beartype
from klogr import get_logger
from pydantic import ConfigDict
from pydantic.dataclasses import dataclass

from padicsol._errors import (
    InternalError,
    InvalidTransform,
    NotApplicable,
    PreconditionViolated,
)
from padicsol._types import (
    INF,
    CertificateKind,
    EngineTag,
    PadicContext,
    Valuation,
)
from padicsol.combinat import (
    CriticalShape,
    solve_unit_diagonal_mod_p,
    solve_unit_pair_mod_p,
    subset_sum_to,
)
from padicsol.core import (
    DiagLinSystem,
    Transcript,
    TransformStep,
    grouping_step,
    permutation_step,
    scaling_step,
    selection_step,
    stats,
    vp,
)
from padicsol.engines.base import (
    EngineResult,
    check_payload,
    exact_result,
    unresolved,
    witness_at,
)
from padicsol.hensel import LiftedSolution, LineWitness, solve_from_witness
from padicsol.normalize import is_conditioned
from padicsol.tools.cache import jaxtyped
from padicsol.tools.config import DEFAULT_PRECISION

logger = get_logger()

FLAG_NAMES = ("header", "levels", "level-zero", "block-classes", "no-low")


@dataclass(
    config=ConfigDict(
        extra="forbid", frozen=True, arbitrary_types_allowed=True
    ),
    kw_only=True,
)
class CriticalProfile:
    """A critical system in block layout, with its transcript."""

    transcript: Transcript
    """Steps from the solver input to the critical system."""
    theta: int
    """v_p(a_1 + a_2)."""
    blocks: tuple[tuple[int, ...], ...]
    """blocks[j]: indices i >= 2 with v_p(a_i) = j."""
    flags: tuple[bool, bool, bool, bool, bool]
    """Header normalized, level counts, level-zero residues, block
    classes and no low variable at level 0 (see `FLAG_NAMES`)."""
    classes: tuple[int, ...]
    """classes[j]: the common residue of a_i / p^j on block j."""

    @property
    def valid(self) -> bool:
        """All five conditions hold."""
        return all(self.flags)

    @property
    def system(self) -> DiagLinSystem:
        """The critical system."""
        return self.transcript.system

    @property
    def failed(self) -> tuple[str, ...]:
        """Names of the conditions that do not hold."""
        pairs = zip(FLAG_NAMES, self.flags, strict=True)
        return tuple(name for name, ok in pairs if not ok)


def _check_frame(ctx: PadicContext) -> None:
    if ctx.p < 5 or ctx.k != ctx.p - 1:
        msg = f"the k = p - 1 engine needs p >= 5, got p={ctx.p}, k={ctx.k}"
        raise NotApplicable(msg)


def _unit_route(
    transcript: Transcript,
    ctx: PadicContext,
    point: Sequence[int],
    route: str,
) -> EngineResult | None:
    return witness_at(EngineTag.PM1, transcript, ctx, point, route)


def _level_zero(system: DiagLinSystem, ctx: PadicContext) -> list[int]:
    return [i for i, v in enumerate(stats(system, ctx).nu) if v == 0]


def _low_at_zero(system: DiagLinSystem, ctx: PadicContext) -> list[int]:
    st = stats(system, ctx)
    return [
        i
        for i in range(system.s)
        if st.low_flags[i] and st.levels[i] == 0
    ]


def _free_slot_route(
    transcript: Transcript, ctx: PadicContext, route: str
) -> EngineResult | None:
    """Level-0 block plus one low variable at level 0 in the free slot."""
    system = transcript.system
    block = _level_zero(system, ctx)
    low = _low_at_zero(system, ctx)
    if not low or len(block) < ctx.p:
        return None
    y = low[0]
    sol = solve_unit_pair_mod_p(
        [system.a[i] for i in block],
        [system.b[i] for i in block],
        ctx,
        free_slot=system.b[y],
    )
    point = [0] * system.s
    for pos, i in enumerate(block):
        point[i] = sol.values[pos]
    point[y] = sol.values[-1]
    return _unit_route(transcript, ctx, point, route)


def _rotate(
    transcript: Transcript, ctx: PadicContext, level: int
) -> Transcript:
    """x_i -> p x_i below `level`; divide by p^level and p."""
    p = ctx.p
    nu = stats(transcript.system, ctx).nu
    mults = [p if v < level else 1 for v in nu]
    return transcript.then(
        scaling_step(
            mults,
            scale_a=Fraction(1, p**level),
            scale_b=Fraction(1, p),
            label="rotate",
        )
    )


def _rotated_route(
    transcript: Transcript, ctx: PadicContext, level: int, route: str
) -> EngineResult | None:
    """Bring block `level` to level 0, where a unit-b variable turns low."""
    rotated = _rotate(transcript, ctx, level)
    system = rotated.system
    block = _level_zero(system, ctx)
    if len(block) >= ctx.p:
        return _free_slot_route(rotated, ctx, route)
    low = _low_at_zero(system, ctx)
    if not low:
        return None
    sol = solve_unit_diagonal_mod_p([system.a[i] for i in block], ctx)
    if not sol.solved:
        return None
    p = ctx.p
    point = [0] * system.s
    for pos, i in enumerate(block):
        point[i] = sol.values[pos]
    y = low[0]
    linear = sum(system.b[i] * point[i] for i in block)
    point[y] = -linear * pow(system.b[y], -1, p) % p
    return _unit_route(rotated, ctx, point, route)


def _pair_route(
    transcript: Transcript, ctx: PadicContext, route: str
) -> EngineResult | CriticalShape | None:
    system = transcript.system
    block = _level_zero(system, ctx)
    sol = solve_unit_pair_mod_p(
        [system.a[i] for i in block], [system.b[i] for i in block], ctx
    )
    if not sol.solved:
        return sol.shape
    point = [0] * system.s
    for pos, i in enumerate(block):
        point[i] = sol.values[pos]
    return _unit_route(transcript, ctx, point, route)


@jaxtyped(typechecker=beartype)
def critical_profile(
    transcript: Transcript, ctx: PadicContext
) -> CriticalProfile:
    """Evaluate the five critical conditions on `transcript.system`.

    The system is read in block layout: indices 0 and 1 are the header,
    block j occupies indices k j + 2 .. k j + k + 1.
    """
    system = transcript.system
    p, k, s = ctx.p, ctx.k, system.s
    a, b = system.a, system.b
    st = stats(system, ctx)
    blocks = tuple(tuple(range(k * j + 2, k * j + k + 2)) for j in range(k))
    header = a[0] + a[1] != 0 and b[0] == 1 and b[1] == -1
    levels = s == k * k + 2 and all(
        st.nu[i] == j for j, block in enumerate(blocks) for i in block
    )
    theta = int(vp(a[0] + a[1], p)) if a[0] + a[1] else 0
    level_zero = (
        levels
        and a[0] % p != 0
        and (a[0] + a[1]) % p == 0
        and all(a[i] % p == 1 and b[i] % p == 0 for i in blocks[0])
    )
    classes = [1]
    same = levels
    for j in range(1, k):
        if not levels:
            classes.append(0)
            continue
        residues = {(a[i] // p**j) % p for i in blocks[j]}
        same = same and len(residues) == 1
        classes.append(min(residues))
    no_low = not _low_at_zero(system, ctx)
    return CriticalProfile(
        transcript=transcript,
        theta=theta,
        blocks=blocks,
        flags=(header, levels, level_zero, same, no_low),
        classes=tuple(classes),
    )


def _normalize_header(
    transcript: Transcript, ctx: PadicContext, shape: CriticalShape
) -> Transcript:
    """Block layout, then b_1 = 1, b_2 = -1 and a' = 1."""
    p, k = ctx.p, ctx.k
    system = transcript.system
    st = stats(system, ctx)
    block0 = _level_zero(system, ctx)
    layout = [block0[m] for m in shape.permutation]
    for level in range(1, k):
        layout += [i for i, v in enumerate(st.nu) if v == level]
    permuted = transcript.then(permutation_step(layout))
    b1, b2 = permuted.system.b[0], permuted.system.b[1]
    mults: list[Fraction | int] = [Fraction(1, b1), Fraction(-1, b2)]
    mults += [1] * (system.s - 2)
    inverse = pow(shape.a_prime, -1, p)
    return permuted.then(
        scaling_step(
            mults,
            scale_a=(b1 * b2) ** k * inverse,
            label="normalize-header",
        )
    )


@jaxtyped(typechecker=beartype)
def reduce_to_critical(
    transcript: Transcript, ctx: PadicContext
) -> EngineResult | CriticalProfile:
    """Run the reduction ladder on a conditioned system.

    In order: a low variable at level 0, at least k + 3 unit coefficients,
    a block with more than k variables, a block whose coefficients are not
    all congruent, and finally the pair solver on the level-0 block. If
    every shortcut fails the system is normalized to critical form (or
    solved exactly when a_1 = -a_2).

    Raises:
        NotApplicable: Outside k = p - 1, p >= 5, s >= k^2 + 2, or on an
            unconditioned system.
        InternalError: The ladder ends outside the critical shape.

    """
    _check_frame(ctx)
    system = transcript.system
    p, k, s = ctx.p, ctx.k, system.s
    if s < k * k + 2:
        msg = f"need at least k^2 + 2 = {k * k + 2} variables, got {s}"
        raise NotApplicable(msg)
    st = stats(system, ctx)
    if not is_conditioned(system, ctx) or any(v >= k for v in st.nu):
        msg = "reduce_to_critical needs a conditioned system with v_p(a_i) < k"
        raise NotApplicable(msg)
    found = _free_slot_route(transcript, ctx, "low-level-zero")
    if found is not None:
        return found
    if _low_at_zero(system, ctx):
        msg = "low variable at level 0 but the free-slot witness failed"
        logger.error(msg)
        raise InternalError(msg)
    upsilon = st.upsilon
    if upsilon[0] >= k + 3:
        found = _pair_route(transcript, ctx, "wide-level-zero")
        if isinstance(found, EngineResult):
            return found
    for level in range(1, k):
        if upsilon[level] >= k + 1:
            found = _rotated_route(transcript, ctx, level, "wide-block")
            if isinstance(found, EngineResult):
                return found
    for level in range(1, k):
        block = [i for i, v in enumerate(st.nu) if v == level]
        if len({(system.a[i] // p**level) % p for i in block}) > 1:
            found = _rotated_route(transcript, ctx, level, "block-shape")
            if isinstance(found, EngineResult):
                return found
    if upsilon != (k + 2, *([k] * (k - 1))):
        msg = f"ladder exhausted with level counts {upsilon}"
        logger.error(msg)
        raise InternalError(msg)
    found = _pair_route(transcript, ctx, "level-zero-pair")
    if isinstance(found, EngineResult):
        return found
    if found is None:
        msg = "level-zero pair solution failed its witness check"
        logger.error(msg)
        raise InternalError(msg)
    normalized = _normalize_header(transcript, ctx, found)
    derived = normalized.system
    if derived.a[0] + derived.a[1] == 0:
        point = [1, 1] + [0] * (s - 2)
        logger.debug("critical header with a_1 = -a_2: exact solution")
        return exact_result(
            EngineTag.PM1, normalized, "opposite-header", point
        )
    profile = critical_profile(normalized, ctx)
    if not profile.valid:
        msg = f"critical normalization broke {profile.failed}"
        logger.error(msg)
        raise InternalError(msg)
    logger.debug(f"critical system with theta={profile.theta}")
    return profile


@jaxtyped(typechecker=beartype)
def pin_header_pair(
    a1: int, a2: int, c: int, d: int, level: int, ctx: PadicContext
) -> tuple[int, int, int]:
    """Integers x_1, x_2, c' with a_1 x_1^k + a_2 x_2^k = p^level c'.

    Also x_1 - x_2 = p^level d and c' = c mod p. With x = k a_1 d / c
    mod p one takes x_2 = x and x_1 = x + p^level d.

    Raises:
        PreconditionViolated: Unless p divides neither c, d nor a_1,
            p | a_1 + a_2 and 1 <= level < v_p(a_1 + a_2).

    """
    _check_frame(ctx)
    p, k = ctx.p, ctx.k
    if c % p == 0 or d % p == 0:
        msg = f"c={c} and d={d} must be units mod {p}"
        raise PreconditionViolated(msg)
    theta = vp(a1 + a2, p)
    if a1 % p == 0 or theta == 0:
        msg = f"need a unit a_1 with {p} | a_1 + a_2, got ({a1}, {a2})"
        raise PreconditionViolated(msg)
    if not 1 <= level < theta:
        msg = f"level must satisfy 1 <= l < {theta}, got {level}"
        raise PreconditionViolated(msg)
    x = k * a1 * d * pow(c, -1, p) % p
    x1, x2 = x + p**level * d, x
    total = a1 * x1**k + a2 * x2**k
    c_prime, rest = divmod(total, p**level)
    if rest or (c_prime - c) % p:
        msg = f"pinned pair ({x1}, {x2}) missed p^{level} c for c={c}"
        logger.error(msg)
        raise InternalError(msg)
    return x1, x2, c_prime


def _pin(
    transcript: Transcript,
    ctx: PadicContext,
    pins: tuple[int, int],
    others: Sequence[int],
    level: int,
    *,
    scale: int = 1,
    label: str,
) -> Transcript:
    """Group the header into w with multipliers `pins`, keep `others`."""
    p = ctx.p
    groups = [[(0, pins[0]), (1, pins[1])], *([(m, 1)] for m in others)]
    return transcript.then(
        grouping_step(
            groups,
            transcript.system.s,
            scale_a=Fraction(scale, p**level),
            scale_b=Fraction(1, p**level),
            label=label,
        )
    )


def _low_block(
    transcript: Transcript,
    ctx: PadicContext,
    block: Sequence[int],
    z: int,
    level: int,
    route: str,
) -> EngineResult | None:
    """Header, a high block at `level` and one low variable z at `level`."""
    system = transcript.system
    p, k = ctx.p, ctx.k
    c1 = (system.a[block[0]] // p**level) % p
    x1, x2, _ = pin_header_pair(
        system.a[0], system.a[1], -k * c1, 1, level, ctx
    )
    pinned = _pin(transcript, ctx, (x1, x2), [*block, z], level, label=route)
    derived = pinned.system
    f = derived.b[-1]
    linear = sum(derived.b[: len(block) + 1])
    point = [1] * (len(block) + 1) + [-linear * pow(f, -1, p) % p]
    return _unit_route(pinned, ctx, point, route)


def _equal_block(
    transcript: Transcript,
    ctx: PadicContext,
    y1: int,
    y2: int,
    level: int,
    route: str,
) -> EngineResult | None:
    """Header and two block variables, y_1 with v_p(a) = v_p(b) = level."""
    system = transcript.system
    p = ctx.p
    q = p**level
    c1, c2 = (system.a[y1] // q) % p, (system.a[y2] // q) % p
    d1 = (system.b[y1] // q) % p
    d2 = system.b[y2] // q
    u = 0 if d2 % p else 1
    x1, x2, _ = pin_header_pair(
        system.a[0], system.a[1], -c1 - u * c2, -d1, level, ctx
    )
    pinned = _pin(transcript, ctx, (x1, x2), [y1, y2], level, label=route)
    return _unit_route(pinned, ctx, [1, 1, u], route)


def _theta_level(
    transcript: Transcript,
    ctx: PadicContext,
    block: Sequence[int],
    theta: int,
    route: str,
) -> EngineResult | None:
    """Header and a block with v_p(a_i) = theta <= v_p(b_i).

    The degree-k equation is scaled so every block coefficient is 1 mod p;
    with a_1 + a_2 = -alpha p^theta mod p^(theta+1) the case split is on
    alpha and on the number of block variables with a unit b / p^theta.
    """
    system = transcript.system
    p, k = ctx.p, ctx.k
    q = p**theta
    a1, a2 = system.a[0], system.a[1]
    inverse = pow((system.a[block[0]] // q) % p, -1, p)
    d_res = {i: (system.b[i] // q) % p for i in block}
    order = sorted(block, key=lambda i: d_res[i] == 0)
    units = sum(1 for i in block if d_res[i])
    if units == 0:
        return None
    alpha = -inverse * ((a1 + a2) // q) % p
    # Shift for the two-variable cases: scaled a_w = -2 mod p.
    shift = (alpha - 2) * pow(inverse * a1 * k, -1, p) % p
    if alpha >= 2 and units >= 2:
        ys = order[:alpha]
        if len(ys) < alpha:
            return None
        spread = sum(d_res[i] for i in ys[2:]) % p
        da, db = d_res[ys[0]], d_res[ys[1]]
        if spread == 0:
            z = [1, -da * pow(db, -1, p) % p]
        else:
            v = 1 if -spread % p != 1 else 2
            z = [v * pow(da, -1, p) % p, (-spread - v) * pow(db, -1, p) % p]
        pins, values, tag = (1, 1), [*z, *([1] * (alpha - 2))], "spread"
    elif alpha == 1 and units >= 2:
        ys = order[:2]
        da, db = d_res[ys[0]], d_res[ys[1]]
        values = [shift * pow(da, -1, p) % p, -2 * shift * pow(db, -1, p) % p]
        pins, tag = (1 + shift * q, 1), "shifted-pair"
    elif alpha <= p - 2:
        ys = order[: alpha + 1]
        if len(ys) < alpha + 1:
            return None
        pins, values, tag = (1, 1), [0, *([1] * alpha)], "single-unit"
    else:
        ys = order[:2]
        if len(ys) < 2:
            return None
        values = [-shift * pow(d_res[ys[0]], -1, p) % p, 1]
        pins, tag = (1 + shift * q, 1), "single-unit-shifted"
    name = f"{route}/{tag}"
    pinned = _pin(
        transcript, ctx, pins, ys, theta, scale=inverse, label=name
    )
    return _unit_route(pinned, ctx, [1, *values], name)


def _theta_block(
    profile: CriticalProfile, ctx: PadicContext
) -> EngineResult | None:
    """Line witness on the header and block theta mod k.

    With theta = ups k + r and y = p^ups z on block r, choose z with
    sum c_i z_i^k = -(a_1 + a_2) / p^theta mod p, set
    h = -sum b_i p^ups z_i and move along x_1 = t + h, x_2 = t.
    """
    system = profile.system
    p, k = ctx.p, ctx.k
    theta = profile.theta
    ups, r = divmod(theta, k)
    block = profile.blocks[r]
    mu = stats(system, ctx).mu
    if any(mu[i] <= theta - ups for i in block):
        return None
    a_prime = (system.a[0] + system.a[1]) // p**theta
    units = [(system.a[i] // p**r) % p for i in block]
    chosen = subset_sum_to(units, p, -a_prime % p)
    if not chosen:
        return None
    z = [0] * len(block)
    for m in chosen:
        z[m] = p**ups
    h = -sum(system.b[i] * v for i, v in zip(block, z, strict=True))
    selected = profile.transcript.then(
        selection_step([0, 1, *block], system.s, label="theta-block")
    )
    line = LineWitness(
        point=(h, 0, *z),
        direction=(1, 1, *([0] * len(block))),
        t0=1,
        ctx=ctx,
        system=selected.system,
    )
    result = EngineResult(
        engine=EngineTag.PM1,
        route="theta-block",
        transcript=selected,
        kind=CertificateKind.NEWTON_LINE,
        line=line,
    )
    verdict = check_payload(result, selected.system)
    if not verdict:
        logger.debug(f"theta-block: line witness rejected ({verdict.reason})")
        return None
    logger.debug(f"route theta-block on block {r} with h={h}")
    return result


def _low_below_theta(
    profile: CriticalProfile, ctx: PadicContext
) -> EngineResult | None:
    """Low variable of smallest level (then index) below theta."""
    system = profile.system
    st = stats(system, ctx)
    lows = [
        i
        for i in range(2, system.s)
        if st.low_flags[i] and st.levels[i] < profile.theta
    ]
    if not lows:
        return None
    z = min(lows, key=lambda i: (st.levels[i], i))
    level = int(st.levels[z])
    return _low_block(
        profile.transcript,
        ctx,
        profile.blocks[level],
        z,
        level,
        "low-below-theta",
    )


def _equal_below_theta(
    profile: CriticalProfile, ctx: PadicContext
) -> EngineResult | None:
    """Variable with 1 <= v_p(a) = v_p(b) < theta, paired in its block."""
    system = profile.system
    st = stats(system, ctx)
    hits = [
        i
        for i in range(2, system.s)
        if st.nu[i] == st.mu[i] and 1 <= st.nu[i] < profile.theta
    ]
    if not hits:
        return None
    y1 = hits[0]
    level = int(st.nu[y1])
    y2 = next(i for i in profile.blocks[level] if i != y1)
    return _equal_block(
        profile.transcript, ctx, y1, y2, level, "equal-below-theta"
    )


def _block_of(profile: CriticalProfile) -> dict[int, int]:
    return {i: j for j, block in enumerate(profile.blocks) for i in block}


@jaxtyped(typechecker=beartype)
def sweep_valuations(
    profile: CriticalProfile, tau: int, ctx: PadicContext
) -> tuple[tuple[Valuation, ...], tuple[Valuation, ...]]:
    """(v_p(a_i), v_p(b_i)) after `sweep_step(profile, tau, ctx)`.

    With tau = u k + rho, blocks 0..rho are scaled by p^(u+1) and the
    others by p^u, so nu grows by k and mu by 1 per power of p.
    """
    k = ctx.k
    u, rho = divmod(tau, k)
    st = stats(profile.system, ctx)
    nu, mu = list(st.nu), list(st.mu)
    for i, j in _block_of(profile).items():
        power = u + 1 if j <= rho else u
        nu[i] = st.nu[i] + k * power
        mu[i] = st.mu[i] + power
    return tuple(nu), tuple(mu)


@jaxtyped(typechecker=beartype)
def sweep_step(
    profile: CriticalProfile, tau: int, ctx: PadicContext
) -> TransformStep:
    """The block scaling of `sweep_valuations` as a transform step."""
    u, rho = divmod(tau, ctx.k)
    mults = [1] * profile.system.s
    for i, j in _block_of(profile).items():
        mults[i] = ctx.p ** (u + 1 if j <= rho else u)
    return scaling_step(mults, label=f"sweep-{tau}")


@jaxtyped(typechecker=beartype)
def first_crossing(profile: CriticalProfile, ctx: PadicContext) -> int | None:
    """Smallest tau at which some block variable has v_p(a) >= v_p(b).

    Variable i in block j needs a power P with (k - 1) P >= mu_i - nu_i;
    the first tau giving block j the power P >= 1 is (P - 1) k + j.
    Returns None when every block variable has b_i = 0.
    """
    k = ctx.k
    st = stats(profile.system, ctx)
    best: int | None = None
    for i, j in _block_of(profile).items():
        if st.mu[i] == INF:
            continue
        gap = int(st.mu[i]) - int(st.nu[i])
        power = max(0, -(-gap // (k - 1)))
        tau = 0 if power == 0 else (power - 1) * k + j
        best = tau if best is None else min(best, tau)
    return best


def _sweep(profile: CriticalProfile, ctx: PadicContext) -> EngineResult | None:
    k, theta = ctx.k, profile.theta
    t = first_crossing(profile, ctx)
    if t is None or t > theta - k:
        logger.debug(f"sweep: crossing {t} beyond theta - k = {theta - k}")
        return _theta_block(profile, ctx)
    rho = t % k
    swept = profile.transcript.then(sweep_step(profile, t, ctx))
    _, mu = sweep_valuations(profile, t, ctx)
    block = profile.blocks[rho]
    beta = int(min(mu[i] for i in block))
    logger.debug(f"sweep: t={t}, block {rho}, beta={beta}, theta={theta}")
    first = min(i for i in block if mu[i] == beta)
    if beta < t + k:
        return _low_block(
            swept, ctx, profile.blocks[beta % k], first, beta, "sweep-low"
        )
    if beta < theta:
        other = next(i for i in block if i != first)
        return _equal_block(swept, ctx, first, other, beta, "sweep-equal")
    return _theta_level(swept, ctx, block, theta, "sweep-theta")


@jaxtyped(typechecker=beartype)
def solve_critical(
    profile: CriticalProfile, ctx: PadicContext
) -> EngineResult:
    """Solve a critical system.

    For theta < k the block at level theta decides: all its b_i of higher
    valuation than theta gives the line route, a low variable below theta
    the low-block route, otherwise the theta-level route. For theta >= k
    the low and equal variables below theta are tried first, then the
    block sweep picks the block and level.

    Raises:
        PreconditionViolated: If the profile is not critical.
        InternalError: No route produced a checked witness.

    """
    _check_frame(ctx)
    if not profile.valid:
        msg = f"not a critical system: {profile.failed} fail"
        raise PreconditionViolated(msg)
    k, theta = ctx.k, profile.theta
    mu = stats(profile.system, ctx).mu
    result: EngineResult | None = None
    try:
        if theta < k:
            block = profile.blocks[theta]
            if all(mu[i] > theta for i in block):
                result = _theta_block(profile, ctx)
            elif any(mu[i] < theta for i in block):
                result = _low_below_theta(profile, ctx)
            else:
                result = _theta_level(
                    profile.transcript, ctx, block, theta, "theta-level"
                )
        else:
            result = (
                _low_below_theta(profile, ctx)
                or _equal_below_theta(profile, ctx)
                or _sweep(profile, ctx)
            )
    except InvalidTransform as exc:
        msg = f"critical route produced a non-integral system: {exc}"
        logger.error(msg)
        raise InternalError(msg) from exc
    if result is None:
        msg = f"no critical route applies (theta={theta})"
        logger.error(msg)
        raise InternalError(msg)
    return result


def _lift_back(result: EngineResult, precision: int) -> LiftedSolution:
    if result.hensel is None:
        msg = f"route {result.route} returned no Hensel witness"
        raise InternalError(msg)
    lifted = solve_from_witness(result.hensel, precision)
    x = result.transcript.pull_back(lifted.x)
    nonzero = next(i for i, v in enumerate(x) if v)
    return LiftedSolution(
        x=x, nonzero_index=nonzero, precision=precision, trace=lifted.trace
    )


def _check_classes(c: Sequence[int], d: Sequence[int], p: int) -> None:
    if not c or len(c) != len(d):
        msg = "c and d must be nonempty and of equal length"
        raise PreconditionViolated(msg)
    if c[0] % p == 0 or any((ci - c[0]) % p for ci in c):
        msg = f"c must be units congruent mod {p}: {list(c)}"
        raise PreconditionViolated(msg)


@jaxtyped(typechecker=beartype)
def solve_low_block_system(
    a1: int,
    a2: int,
    c: Sequence[int],
    d: Sequence[int],
    e: int,
    f: int,
    level: int,
    ctx: PadicContext,
    precision: int = DEFAULT_PRECISION,
) -> LiftedSolution:
    """Solve the header plus a block at `level` plus one low variable z.

    a_1 x_1^k + a_2 x_2^k + p^l (sum c_i y_i^k) + p^(l+1) e z^k = 0 and
    x_1 - x_2 + p^l (sum d_i y_i) + p^l f z = 0, for 1 <= l < theta.
    Returns (x_1, x_2, y, z) with the linear equation exact and the
    degree-k one to precision `precision`.

    Raises:
        PreconditionViolated: If p | f, the c_i are not congruent units,
            or the level is out of range.

    """
    _check_frame(ctx)
    p, k = ctx.p, ctx.k
    _check_classes(c, d, p)
    if f % p == 0:
        msg = f"f={f} must be a unit mod {p}"
        raise PreconditionViolated(msg)
    q = p**level
    system = DiagLinSystem.of(
        [a1, a2, *(q * ci for ci in c), p * q * e],
        [1, -1, *(q * di for di in d), q * f],
    )
    n = len(c)
    result = _low_block(
        Transcript.start(system, k),
        ctx,
        list(range(2, n + 2)),
        n + 2,
        level,
        "low-block",
    )
    if result is None:
        msg = "low-block witness failed its check"
        logger.error(msg)
        raise InternalError(msg)
    return _lift_back(result, precision)


@jaxtyped(typechecker=beartype)
def solve_high_block_system(
    a1: int,
    a2: int,
    c: Sequence[int],
    d: Sequence[int],
    level: int,
    ctx: PadicContext,
    precision: int = DEFAULT_PRECISION,
) -> LiftedSolution:
    """Solve the header plus a block at `level` with b_i divisible by p^l.

    a_1 x_1^k + a_2 x_2^k + p^l (sum c_i y_i^k) = 0 and
    x_1 - x_2 + p^l (sum d_i y_i) = 0 for 1 <= l <= theta. Below theta
    d_1 must be a unit; at theta some d_i must be.

    Raises:
        PreconditionViolated: Outside those hypotheses.

    """
    _check_frame(ctx)
    p, k = ctx.p, ctx.k
    _check_classes(c, d, p)
    theta = vp(a1 + a2, p)
    q = p**level
    system = DiagLinSystem.of(
        [a1, a2, *(q * ci for ci in c)], [1, -1, *(q * di for di in d)]
    )
    transcript = Transcript.start(system, k)
    n = len(c)
    if 1 <= level < theta:
        if d[0] % p == 0 or n < 2:
            msg = f"below theta d_1 must be a unit and n >= 2, got d={list(d)}"
            raise PreconditionViolated(msg)
        result = _equal_block(transcript, ctx, 2, 3, level, "equal-block")
    elif level == theta and a1 % p:
        if all(di % p == 0 for di in d):
            msg = f"at theta some d_i must be a unit mod {p}"
            raise PreconditionViolated(msg)
        result = _theta_level(
            transcript, ctx, list(range(2, n + 2)), level, "theta-level"
        )
    else:
        msg = f"level must satisfy 1 <= l <= theta = {theta}, got {level}"
        raise PreconditionViolated(msg)
    if result is None:
        msg = "block witness failed its check"
        logger.error(msg)
        raise InternalError(msg)
    return _lift_back(result, precision)


@jaxtyped(typechecker=beartype)
def solve_pm1(transcript: Transcript, ctx: PadicContext) -> EngineResult:
    """Reduce to a critical system and solve it."""
    try:
        outcome = reduce_to_critical(transcript, ctx)
    except NotApplicable as exc:
        return unresolved(EngineTag.PM1, transcript, "reduce", str(exc))
    if isinstance(outcome, EngineResult):
        logger.info(f"k = p - 1 engine solved by route {outcome.route}")
        return outcome
    try:
        result = solve_critical(outcome, ctx)
    except InternalError as exc:
        logger.warning(f"critical system left unsolved: {exc}")
        return unresolved(
            EngineTag.PM1, outcome.transcript, "critical", str(exc)
        )
    logger.info(f"critical system solved by route {result.route}")
    return result
