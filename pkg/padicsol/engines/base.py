"""What every engine hands back, and the re-check that gates it.

An engine receives a `Transcript` whose derived system is the normalized
input, extends it with its own steps and returns an `EngineResult` holding
one payload on the final derived system. `settle` re-checks that payload
on the honest replay (perturbation offsets dropped); if the check fails it
falls back to the exhaustive oracle on the same system before giving up.
"""

from collections.abc import Sequence
from fractions import Fraction

from beartype import beartype
from klogr import get_logger
from pydantic import ConfigDict
from pydantic.dataclasses import dataclass

from padicsol._errors import BudgetExceeded
from padicsol._types import CertificateKind, EngineTag, PadicContext
from padicsol.core import DiagLinSystem, Transcript, find_unit_minor
from padicsol.hensel import (
    HenselWitness,
    LineWitness,
    Verdict,
    check_line_witness,
    check_witness,
)
from padicsol.oracle import CongruenceQuery, find_nonsingular
from padicsol.tools.cache import jaxtyped
from padicsol.tools.config import DEFAULT_BUDGET

logger = get_logger()


@dataclass(
    config=ConfigDict(
        extra="forbid", frozen=True, arbitrary_types_allowed=True
    ),
    kw_only=True,
)
class EngineResult:
    """One engine outcome on `transcript.system`."""

    engine: EngineTag
    """The engine that produced the payload."""
    route: str
    """Name of the constructive route taken."""
    transcript: Transcript
    """Steps from the solver input to the system the payload lives on."""
    kind: CertificateKind
    """Payload kind."""
    hensel: HenselWitness | None = None
    """Set for HENSEL_WITNESS."""
    line: LineWitness | None = None
    """Set for NEWTON_LINE."""
    exact: tuple[Fraction, ...] | None = None
    """Set for EXACT_RATIONAL: an exact solution of the derived system."""
    note: str | None = None
    """Why the result is unresolved, or what the fallback did."""

    @property
    def resolved(self) -> bool:
        """True unless the kind is UNRESOLVED."""
        return self.kind != CertificateKind.UNRESOLVED


def unresolved(
    engine: EngineTag, transcript: Transcript, route: str, note: str
) -> EngineResult:
    """Shorthand for an UNRESOLVED result."""
    return EngineResult(
        engine=engine,
        route=route,
        transcript=transcript,
        kind=CertificateKind.UNRESOLVED,
        note=note,
    )


def exact_result(
    engine: EngineTag,
    transcript: Transcript,
    route: str,
    point: tuple[Fraction, ...] | list[Fraction] | list[int],
) -> EngineResult:
    """Shorthand for an EXACT_RATIONAL result."""
    return EngineResult(
        engine=engine,
        route=route,
        transcript=transcript,
        kind=CertificateKind.EXACT_RATIONAL,
        exact=tuple(Fraction(v) for v in point),
    )


def hensel_result(
    engine: EngineTag,
    transcript: Transcript,
    route: str,
    x: tuple[int, ...] | list[int],
    pivot: tuple[int, int],
    ctx: PadicContext,
) -> EngineResult:
    """Shorthand for a HENSEL_WITNESS result on `transcript.system`."""
    modulus = ctx.modulus
    return EngineResult(
        engine=engine,
        route=route,
        transcript=transcript,
        kind=CertificateKind.HENSEL_WITNESS,
        hensel=HenselWitness(
            x=tuple(v % modulus for v in x),
            pivot=pivot,
            ctx=ctx,
            system=transcript.system,
        ),
    )


def check_exact(
    system: DiagLinSystem, point: tuple[Fraction, ...], k: int
) -> Verdict:
    """Exact solution check: A = B = 0 and a nonzero coordinate."""
    if len(point) != system.s:
        return Verdict(ok=False, reason="point length mismatch")
    big_a, big_b = system.form_values(point, k)
    if big_a != 0 or big_b != 0:
        return Verdict(ok=False, reason=f"A = {big_a}, B = {big_b}")
    idx = next((i for i, v in enumerate(point) if v), None)
    if idx is None:
        return Verdict(ok=False, reason="zero vector")
    return Verdict(ok=True, nonzero_index=idx)


@jaxtyped(typechecker=beartype)
def check_payload(result: EngineResult, system: DiagLinSystem) -> Verdict:
    """Re-check the payload of `result` against `system`."""
    if result.kind == CertificateKind.EXACT_RATIONAL and result.exact:
        return check_exact(system, result.exact, result.transcript.degree)
    if result.kind == CertificateKind.HENSEL_WITNESS and result.hensel:
        w = result.hensel
        return check_witness(
            HenselWitness(x=w.x, pivot=w.pivot, ctx=w.ctx, system=system)
        )
    if result.kind == CertificateKind.NEWTON_LINE and result.line:
        w = result.line
        return check_line_witness(
            LineWitness(
                point=w.point,
                direction=w.direction,
                t0=w.t0,
                ctx=w.ctx,
                system=system,
            )
        )
    return Verdict(ok=False, reason=f"no payload for kind {result.kind.value}")


def witness_at(
    engine: EngineTag,
    transcript: Transcript,
    ctx: PadicContext,
    point: Sequence[int],
    route: str,
) -> EngineResult | None:
    """HENSEL_WITNESS at `point` with the first unit pivot minor.

    Returns None when no minor is a unit or the witness fails its check.
    """
    system = transcript.system
    x = [v % ctx.modulus for v in point]
    pivot = find_unit_minor(system, x, ctx.k, ctx.p)
    if pivot is None:
        logger.debug(f"{route}: no unit minor at {x}")
        return None
    result = hensel_result(engine, transcript, route, x, pivot, ctx)
    verdict = check_payload(result, system)
    if not verdict:
        logger.debug(f"{route}: witness rejected ({verdict.reason})")
        return None
    logger.debug(f"route {route} with pivot {pivot}")
    return result


def _oracle_fallback(
    result: EngineResult, system: DiagLinSystem, ctx: PadicContext, budget: int
) -> EngineResult | None:
    if not ctx.has_tau:
        return None
    try:
        report = find_nonsingular(
            CongruenceQuery(system=system, ctx=ctx, budget=budget)
        )
    except BudgetExceeded:
        return None
    if not report.found or report.nonsingular_pivot is None:
        return None
    transcript = Transcript(
        source=result.transcript.source,
        degree=result.transcript.degree,
        steps=result.transcript.steps,
        derived=system,
    )
    out = hensel_result(
        result.engine,
        transcript,
        f"{result.route}+oracle",
        report.witness or (),
        report.nonsingular_pivot,
        ctx,
    )
    return out


@jaxtyped(typechecker=beartype)
def settle(
    result: EngineResult, ctx: PadicContext, budget: int = DEFAULT_BUDGET
) -> EngineResult:
    """Re-check `result` on the honest replay; fall back to the oracle.

    The returned result always lives on the honest derived system, and
    its certified nonzero coordinate is reached by some input variable.
    """
    honest = result.transcript.replay(honest=True)
    image = result.transcript.image()
    if result.resolved:
        verdict = check_payload(result, honest)
        if verdict and verdict.nonzero_index in image:
            if honest == result.transcript.system:
                return result
            return _rebase(result, honest)
        logger.warning(
            f"{result.engine.value}/{result.route} payload failed its check"
            f" ({verdict.reason or 'nonzero coordinate outside the image'});"
            " trying the oracle"
        )
    fallback = _oracle_fallback(result, honest, ctx, budget)
    if fallback is not None:
        verdict = check_payload(fallback, honest)
        if verdict and verdict.nonzero_index in image:
            return fallback
    return EngineResult(
        engine=result.engine,
        route=result.route,
        transcript=result.transcript,
        kind=CertificateKind.UNRESOLVED,
        note=result.note or "no verified payload",
    )


def _rebase(result: EngineResult, honest: DiagLinSystem) -> EngineResult:
    transcript = Transcript(
        source=result.transcript.source,
        degree=result.transcript.degree,
        steps=result.transcript.steps,
        derived=honest,
    )
    hensel = line = None
    if result.hensel is not None:
        w = result.hensel
        hensel = HenselWitness(x=w.x, pivot=w.pivot, ctx=w.ctx, system=honest)
    if result.line is not None:
        w2 = result.line
        line = LineWitness(
            point=w2.point,
            direction=w2.direction,
            t0=w2.t0,
            ctx=w2.ctx,
            system=honest,
        )
    return EngineResult(
        engine=result.engine,
        route=result.route,
        transcript=transcript,
        kind=result.kind,
        hensel=hensel,
        line=line,
        exact=result.exact,
        note=result.note,
    )
