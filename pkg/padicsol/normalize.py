"""Bring a system into preconditioned and conditioned form.

Preconditioned: integer coefficients, every a_i nonzero, some b_i a unit.
Conditioned: additionally #{i : p^j does not divide a_i} >= j s / k for
1 <= j <= k. Every move is a recorded `TransformStep`, so solutions of the
normalized system pull back to the input.
"""

from fractions import Fraction

from beartype import beartype
from klogr import get_logger
from pydantic import ConfigDict
from pydantic.dataclasses import dataclass

from padicsol._errors import InternalError, InvalidInput
from padicsol._types import PadicContext
from padicsol.core import (
    DiagLinSystem,
    Transcript,
    make_step,
    stats,
    vp,
    vp_rational,
)
from padicsol.tools.cache import jaxtyped

logger = get_logger()


@dataclass(
    config=ConfigDict(
        extra="forbid", frozen=True, arbitrary_types_allowed=True
    ),
    kw_only=True,
)
class ConditioningReport:
    """Result of `condition` / `normalize`."""

    transcript: Transcript
    """Steps from the input to the conditioned system."""
    shift: int
    """Cyclic shift r: level r of the input became level 0."""
    upsilon_after: tuple[int, ...]
    """Level counts of the conditioned system."""
    perturbation_exponent: int | None = None
    """n with zero a_i replaced by p^n, when any were zero."""

    @property
    def system(self) -> DiagLinSystem:
        """The conditioned system."""
        return self.transcript.system


def _b_content(b: tuple[int, ...] | list[Fraction], p: int) -> int:
    return int(min((vp_rational(v, p) for v in b if v), default=0))


def perturbation_exponent(system: DiagLinSystem, ctx: PadicContext) -> int:
    """n = g + k (1 + max finite v_p(a_i)), g the witness exponent."""
    finite = [vp(a, ctx.p) for a in system.a if a]
    top = int(max(finite, default=0))
    base = ctx.gamma if ctx.gamma is not None else ctx.newton_exponent
    return base + ctx.k * (1 + top)


@jaxtyped(typechecker=beartype)
def precondition(
    system: DiagLinSystem, ctx: PadicContext
) -> tuple[DiagLinSystem, Transcript]:
    """Cancel the p-content of b and perturb zero a_i.

    Raises:
        InvalidInput: If every b_i is zero.

    """
    if not any(system.b):
        msg = "the linear form is identically zero"
        raise InvalidInput(msg)
    p, s = ctx.p, system.s
    transcript = Transcript.start(system, ctx.k)
    content = _b_content(system.b, p)
    if content:
        transcript = transcript.then(
            make_step(
                list(range(s)),
                scale_b=Fraction(1, p**content),
                label="cancel-b",
            )
        )
        logger.debug(f"cancelled p^{content} from the linear equation")
    current = transcript.system
    if not all(current.a):
        n = perturbation_exponent(current, ctx)
        offsets = [0 if a else p**n for a in current.a]
        transcript = transcript.then(
            make_step(list(range(s)), offsets_a=offsets, label="perturb")
        )
        logger.info(
            f"perturbed {offsets.count(p**n)} zero coefficient(s) by {p}^{n}"
        )
    return transcript.system, transcript


def _levels_ok(upsilon: tuple[int, ...], s: int, k: int) -> bool:
    total = 0
    for j, count in enumerate(upsilon):
        total += count
        if total * k < (j + 1) * s:
            return False
    return True


@jaxtyped(typechecker=beartype)
def is_conditioned(system: DiagLinSystem, ctx: PadicContext) -> bool:
    """Exact check of the level inequality plus a unit b_i."""
    p, k, s = ctx.p, ctx.k, system.s
    if not all(system.a):
        return False
    if all(b % p == 0 for b in system.b):
        return False
    for j in range(1, k + 1):
        count = sum(1 for a in system.a if a % p**j)
        if count * k < j * s:
            return False
    return True


def _smallest_shift(upsilon: tuple[int, ...], s: int, k: int) -> int:
    for r in range(k):
        if _levels_ok(upsilon[r:] + upsilon[:r], s, k):
            return r
    msg = f"no cyclic shift of {upsilon} satisfies the level inequality"
    logger.error(msg)
    raise InternalError(msg)


@jaxtyped(typechecker=beartype)
def condition(
    system: DiagLinSystem,
    ctx: PadicContext,
    transcript: Transcript | None = None,
) -> ConditioningReport:
    """Reduce every v_p(a_i) below k and rotate the levels.

    Args:
        system (DiagLinSystem): A preconditioned system.
        ctx (PadicContext): The frame.
        transcript (Transcript | None): Steps that produced `system`, to be
            extended; a fresh transcript is started otherwise.

    Returns:
        ConditioningReport: The extended transcript, chosen shift and the
            new level counts.

    """
    if transcript is None:
        transcript = Transcript.start(system, ctx.k)
    if not all(system.a):
        msg = "condition() needs every a_i nonzero; run precondition first"
        raise InvalidInput(msg)
    transcript, r = shift_levels(transcript, ctx)
    after = stats(transcript.system, ctx).upsilon
    logger.debug(f"conditioned with shift {r}: upsilon {after}")
    report = ConditioningReport(
        transcript=transcript, shift=r, upsilon_after=after
    )
    if not is_conditioned(report.system, ctx):
        msg = f"conditioning produced an unconditioned system: {after}"
        logger.error(msg)
        raise InternalError(msg)
    return report


@jaxtyped(typechecker=beartype)
def shift_levels(
    transcript: Transcript, ctx: PadicContext
) -> tuple[Transcript, int]:
    """Reduce each v_p(a_i) mod k, then apply the smallest good shift.

    Works on any system with nonzero a_i, including a contracted diagonal
    equation whose linear coefficients are all zero.
    """
    system = transcript.system
    p, k, s = ctx.p, ctx.k, system.s
    nu = [int(vp(a, p)) for a in system.a]
    alpha = [v // k for v in nu]
    if any(alpha):
        mults = [Fraction(1, p**al) for al in alpha]
        new_b = [b * c for b, c in zip(system.b, mults, strict=True)]
        shift_b = -_b_content(new_b, p)
        transcript = transcript.then(
            make_step(
                list(range(s)),
                mults,
                scale_b=Fraction(p) ** shift_b,
                label="reduce-nu",
            )
        )
        nu = [v - k * al for v, al in zip(nu, alpha, strict=True)]
    upsilon = tuple(nu.count(j) for j in range(k))
    r = _smallest_shift(upsilon, s, k)
    if r:
        mults = [p if v < r else 1 for v in nu]
        current = transcript.system
        new_b = [b * c for b, c in zip(current.b, mults, strict=True)]
        transcript = transcript.then(
            make_step(
                list(range(s)),
                mults,
                scale_a=Fraction(1, p**r),
                scale_b=Fraction(1, p ** _b_content(new_b, p)),
                label="cycle-shift",
            )
        )
    return transcript, r


@jaxtyped(typechecker=beartype)
def normalize(system: DiagLinSystem, ctx: PadicContext) -> ConditioningReport:
    """`precondition` followed by `condition`, in one transcript."""
    pre, transcript = precondition(system, ctx)
    report = condition(pre, ctx, transcript)
    exponent = (
        perturbation_exponent(transcript.source, ctx)
        if transcript.perturbed
        else None
    )
    logger.info(
        f"normalized s={system.s} for p={ctx.p}, k={ctx.k}: shift {report.shift}"
    )
    return ConditioningReport(
        transcript=report.transcript,
        shift=report.shift,
        upsilon_after=report.upsilon_after,
        perturbation_exponent=exponent,
    )
