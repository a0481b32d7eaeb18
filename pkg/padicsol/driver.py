"""End-to-end solve and verify.

`solve` runs precondition, condition, dispatch, the engine and the
re-check gate, and packs the result into a `Certificate`. `verify` trusts
nothing but the certificate and the input system: it replays the
transcript, re-checks the payload, lifts again and measures the residual
valuations on the input.
"""

from collections.abc import Callable
from fractions import Fraction
from itertools import product

from beartype import beartype
from klogr import get_logger
from sympy import isprime

from padicsol._errors import (
    BudgetExceeded,
    ContextNotApplicable,
    InternalError,
    InvalidInput,
    InvalidTransform,
    NotApplicable,
    PadicError,
    PreconditionViolated,
    ScheduleError,
)
from padicsol._types import (
    MIN_DEGREE,
    CertificateKind,
    EngineTag,
    PadicContext,
)
from padicsol.certificate import (
    Certificate,
    DescentTrace,
    LineModel,
    PrecisionDemo,
    SystemFile,
    TranscriptModel,
    WitnessModel,
    frac_str,
    parse_frac,
    parse_int,
    valuation_str,
)
from padicsol.core import DiagLinSystem, Transcript, vp_rational
from padicsol.descent import build_descent, counterexample_system, verify_descent
from padicsol.engines.base import EngineResult, check_exact, settle, unresolved
from padicsol.engines.contract import dispatch_case, solve_contract, solve_diagonal
from padicsol.engines.pm1 import solve_pm1
from padicsol.engines.pow2 import solve_pow2
from padicsol.engines.ppm1 import solve_ppm1
from padicsol.hensel import (
    HenselWitness,
    LiftedSolution,
    LineWitness,
    Verdict,
    check_line_witness,
    check_witness,
    solve_from_line_witness,
    solve_from_witness,
)
from padicsol.normalize import normalize
from padicsol.tools.cache import jaxtyped
from padicsol.tools.config import SolverSettings

logger = get_logger()

SOLUTION_KINDS = frozenset(
    {
        CertificateKind.EXACT_RATIONAL,
        CertificateKind.HENSEL_WITNESS,
        CertificateKind.NEWTON_LINE,
    }
)

# Small-height search: coordinates in -2..2 on the first few variables.
SHORTCUT_VARS = 6
SHORTCUT_SUPPORT = 4
SHORTCUT_HEIGHT = 2

MAX_RELIFT = 10

Engine = Callable[[Transcript, PadicContext], EngineResult]

ENGINES: dict[EngineTag, Engine] = {
    EngineTag.CONTRACT: solve_contract,
    EngineTag.PM1: solve_pm1,
    EngineTag.PPM1: solve_ppm1,
    EngineTag.POW2: solve_pow2,
}


@jaxtyped(typechecker=beartype)
def validate_frame(system: DiagLinSystem, p: int, k: int) -> None:
    """Raises InvalidInput unless p is prime, k >= 4 and s >= 2."""
    if not isprime(p):
        msg = f"p = {p} is not prime"
        raise InvalidInput(msg)
    if k < MIN_DEGREE:
        msg = f"k = {k} is below the supported degree {MIN_DEGREE}"
        raise InvalidInput(msg)
    if system.s < 2:
        msg = f"a system needs at least two variables, got {system.s}"
        raise InvalidInput(msg)


def _solves(system: DiagLinSystem, point: list[int], k: int) -> bool:
    return system.form_values(point, k) == (0, 0) and any(point)


@jaxtyped(typechecker=beartype)
def exact_shortcut(
    system: DiagLinSystem, k: int
) -> tuple[list[int], str] | None:
    """A planted exact solution of small height, if one is visible.

    Checks a variable with a_i = b_i = 0, pairs solved by (1, 1) or
    (1, -1), then coordinates in -2..2 on the first few variables.
    """
    s = system.s
    seen: dict[tuple[int, int], int] = {}
    for j, (a, b) in enumerate(zip(system.a, system.b, strict=True)):
        if a == 0 and b == 0:
            point = [0] * s
            point[j] = 1
            return point, "null-variable"
        for xj in (1, -1):
            partner = seen.get((-a * xj**k, -b * xj))
            if partner is not None:
                point = [0] * s
                point[partner], point[j] = 1, xj
                return point, "opposite-pair"
        seen.setdefault((a, b), j)
    head = min(s, SHORTCUT_VARS)
    values = range(-SHORTCUT_HEIGHT, SHORTCUT_HEIGHT + 1)
    for combo in product(values, repeat=head):
        support = sum(1 for v in combo if v)
        if not support or support > SHORTCUT_SUPPORT:
            continue
        point = [*combo, *([0] * (s - head))]
        if _solves(system, point, k):
            return point, "small-height"
    return None


def _run(
    tag: EngineTag, transcript: Transcript, ctx: PadicContext, budget: int
) -> EngineResult:
    try:
        if tag == EngineTag.CONTRACT:
            return solve_contract(transcript, ctx, budget)
        return ENGINES[tag](transcript, ctx)
    except (
        NotApplicable,
        ContextNotApplicable,
        PreconditionViolated,
        InternalError,
        InvalidTransform,
        ScheduleError,
        BudgetExceeded,
    ) as exc:
        logger.warning(f"engine {tag.value} gave up: {exc}")
        return unresolved(tag, transcript, "engine", str(exc))


def lift(result: EngineResult, precision: int) -> LiftedSolution:
    """Lift the payload of a resolved result on its derived system.

    Raises:
        PreconditionViolated: If the payload fails its check.

    """
    if result.kind == CertificateKind.HENSEL_WITNESS and result.hensel:
        return solve_from_witness(result.hensel, precision)
    if result.kind == CertificateKind.NEWTON_LINE and result.line:
        return solve_from_line_witness(result.line, precision)
    if result.kind == CertificateKind.EXACT_RATIONAL and result.exact:
        idx = next((i for i, v in enumerate(result.exact) if v), None)
        if idx is not None:
            return LiftedSolution(
                x=result.exact, nonzero_index=idx, precision=precision
            )
    msg = f"nothing to lift for kind {result.kind.value}"
    raise PreconditionViolated(msg)


def _scale_valuations(transcript: Transcript, p: int) -> tuple[int, int]:
    va = sum(int(vp_rational(step.scale_a, p)) for step in transcript.steps)
    vb = sum(int(vp_rational(step.scale_b, p)) for step in transcript.steps)
    return va, vb


def _source_index(
    transcript: Transcript, x: tuple[Fraction, ...], j: int
) -> int | None:
    for i, entry in enumerate(transcript.composite_map()):
        if entry is not None and entry[0] == j and x[i]:
            return i
    return None


def precision_demo(
    transcript: Transcript, lifted: LiftedSolution, ctx: PadicContext
) -> PrecisionDemo:
    """Pull `lifted` back to the input variables and measure residuals.

    Raises:
        InternalError: If no input variable carries the nonzero coordinate.

    """
    x = transcript.pull_back(lifted.x)
    big_a, big_b = transcript.source.form_values(x, ctx.k)
    idx = _source_index(transcript, x, lifted.nonzero_index)
    if idx is None:
        msg = f"derived coordinate {lifted.nonzero_index} has no preimage"
        logger.error(msg)
        raise InternalError(msg)
    return PrecisionDemo(
        precision=lifted.precision,
        x=[frac_str(v) for v in x],
        residual_a=valuation_str(vp_rational(big_a, ctx.p)),
        residual_b=valuation_str(vp_rational(big_b, ctx.p)),
        nonzero_index=idx,
    )


@jaxtyped(typechecker=beartype)
def build_certificate(
    result: EngineResult, ctx: PadicContext, precision: int
) -> Certificate:
    """Pack a settled result, with a precision demo for solution kinds."""
    demo = None
    if result.resolved:
        try:
            lifted = lift(result, precision)
            demo = precision_demo(result.transcript, lifted, ctx)
        except (PreconditionViolated, InternalError) as exc:
            logger.warning(f"lift of {result.route} failed: {exc}")
            result = unresolved(
                result.engine, result.transcript, result.route, str(exc)
            )
    fields: dict[str, object] = {
        "kind": result.kind,
        "p": str(ctx.p),
        "k": ctx.k,
        "transcript": TranscriptModel.from_transcript(result.transcript),
        "engine": result.engine,
        "route": result.route,
        "note": result.note,
    }
    if result.exact is not None:
        fields["exact"] = [frac_str(v) for v in result.exact]
    if result.hensel is not None:
        fields["witness"] = WitnessModel(
            x=[str(v) for v in result.hensel.x], pivot=result.hensel.pivot
        )
    if result.line is not None:
        w = result.line
        fields["line"] = LineModel(
            point=[str(v) for v in w.point],
            direction=[str(v) for v in w.direction],
            t0=str(w.t0),
        )
    if demo is not None:
        fields["precision_demo"] = demo
    cert = Certificate(**fields).sealed()  # type: ignore[arg-type]
    logger.info(
        f"certificate {cert.kind.value} from {result.engine.value}/{result.route}"
    )
    return cert


def _shortcut_certificate(
    system: DiagLinSystem,
    ctx: PadicContext,
    point: list[int],
    route: str,
    precision: int,
) -> Certificate:
    transcript = Transcript.start(system, ctx.k)
    idx = next(i for i, v in enumerate(point) if v)
    lifted = LiftedSolution(
        x=tuple(Fraction(v) for v in point),
        nonzero_index=idx,
        precision=precision,
    )
    cert = Certificate(
        kind=CertificateKind.EXACT_RATIONAL,
        p=str(ctx.p),
        k=ctx.k,
        transcript=TranscriptModel.from_transcript(transcript),
        route=route,
        exact=[str(v) for v in point],
        precision_demo=precision_demo(transcript, lifted, ctx),
    ).sealed()
    logger.info(f"exact shortcut {route}")
    return cert


@jaxtyped(typechecker=beartype)
def solve(
    system: DiagLinSystem,
    p: int,
    k: int,
    precision: int | None = None,
    settings: SolverSettings | None = None,
) -> Certificate:
    """Find a certificate of p-adic solubility, or report Unresolved.

    Args:
        system (DiagLinSystem): Coefficients of the degree-k and linear
            forms.
        p (int): The prime.
        k (int): The degree, at least 4.
        precision (int | None): M for the precision demo; the settings
            value when None.
        settings (SolverSettings | None): Budget, precision and engine
            override; read from the environment when None.

    Returns:
        Certificate: Exact rational, Hensel or Newton-line certificate, or
            UNRESOLVED with a note.

    Raises:
        InvalidInput: If p is not prime, k < 4 or s < 2.

    """
    settings = settings or SolverSettings.from_env()
    precision = precision or settings.precision
    validate_frame(system, p, k)
    ctx = PadicContext.of(p, k)
    shortcut = exact_shortcut(system, k)
    if shortcut is not None:
        point, route = shortcut
        return _shortcut_certificate(system, ctx, point, route, precision)
    budget = settings.budget
    start = Transcript.start(system, k)
    if not any(system.b):
        logger.info("linear form is zero; solving the diagonal equation")
        settled = settle(solve_diagonal(start, ctx, budget), ctx, budget)
        return build_certificate(settled, ctx, precision)
    try:
        report = normalize(system, ctx)
    except InternalError as exc:
        result = unresolved(EngineTag.CONTRACT, start, "normalize", str(exc))
        return build_certificate(result, ctx, precision)
    if settings.engine == "auto":
        info = dispatch_case(ctx)
        tag = info.engine
        logger.info(f"dispatch p={p}, k={k}: {tag.value} ({info.coverage})")
    else:
        tag = EngineTag(settings.engine)
        logger.info(f"engine override: {tag.value}")
    settled = settle(_run(tag, report.transcript, ctx, budget), ctx, budget)
    if not settled.resolved and tag != EngineTag.CONTRACT:
        logger.warning(f"{tag.value} unresolved; trying contraction")
        retry = settle(
            _run(EngineTag.CONTRACT, report.transcript, ctx, budget),
            ctx,
            budget,
        )
        if retry.resolved:
            settled = retry
    return build_certificate(settled, ctx, precision)


def _payload_verdict(
    cert: Certificate, system: DiagLinSystem, ctx: PadicContext
) -> tuple[Verdict, EngineResult | None]:
    transcript_stub = Transcript.start(system, ctx.k)
    if cert.kind == CertificateKind.EXACT_RATIONAL and cert.exact is not None:
        point = tuple(parse_frac(v) for v in cert.exact)
        verdict = check_exact(system, point, ctx.k)
        result = EngineResult(
            engine=cert.engine or EngineTag.CONTRACT,
            route=cert.route,
            transcript=transcript_stub,
            kind=cert.kind,
            exact=point,
        )
        return verdict, result
    if cert.kind == CertificateKind.HENSEL_WITNESS and cert.witness:
        w = HenselWitness(
            x=tuple(parse_int(v) for v in cert.witness.x),
            pivot=cert.witness.pivot,
            ctx=ctx,
            system=system,
        )
        verdict = check_witness(w)
        if not verdict:
            verdict = Verdict(
                ok=False, reason=f"witness congruence failed: {verdict.reason}"
            )
        result = EngineResult(
            engine=cert.engine or EngineTag.CONTRACT,
            route=cert.route,
            transcript=transcript_stub,
            kind=cert.kind,
            hensel=w,
        )
        return verdict, result
    if cert.kind == CertificateKind.NEWTON_LINE and cert.line:
        line = LineWitness(
            point=tuple(parse_int(v) for v in cert.line.point),
            direction=tuple(parse_int(v) for v in cert.line.direction),
            t0=parse_int(cert.line.t0),
            ctx=ctx,
            system=system,
        )
        verdict = check_line_witness(line)
        result = EngineResult(
            engine=cert.engine or EngineTag.CONTRACT,
            route=cert.route,
            transcript=transcript_stub,
            kind=cert.kind,
            line=line,
        )
        return verdict, result
    return Verdict(ok=False, reason=f"missing payload for {cert.kind.value}"), None


def _verify_descent_certificate(
    cert: Certificate, original: DiagLinSystem, p: int
) -> Verdict:
    if cert.descent is None:
        return Verdict(ok=False, reason="descent certificate without a trace")
    try:
        expected = counterexample_system(p)
    except PadicError as exc:
        return Verdict(ok=False, reason=f"bad frame: {exc}")
    if expected != original:
        return Verdict(ok=False, reason="source system differs from the input")
    return verify_descent(cert.descent)


@jaxtyped(typechecker=beartype)
def verify(cert: Certificate, original: DiagLinSystem) -> Verdict:
    """Check `cert` against `original` without trusting any engine. Total.

    Returns a failed verdict naming the first failing step: fingerprint,
    source, invalid step, payload, image, lift or residual.
    """
    try:
        p = parse_int(cert.p)
        ctx = PadicContext.of(p, cert.k)
    except (PadicError, ValueError) as exc:
        return Verdict(ok=False, reason=f"bad frame: {exc}")
    if cert.fingerprint and cert.fingerprint != cert.digest():
        return Verdict(ok=False, reason="fingerprint mismatch")
    if cert.kind == CertificateKind.INSOLUBILITY_DESCENT:
        return _verify_descent_certificate(cert, original, p)
    if cert.kind == CertificateKind.UNRESOLVED:
        return Verdict(ok=False, reason="unresolved certificate")
    try:
        if cert.transcript.source() != original:
            return Verdict(ok=False, reason="source system differs from the input")
        transcript = cert.transcript.to_transcript()
        honest = transcript.replay(honest=True)
    except (PadicError, ValueError) as exc:
        return Verdict(ok=False, reason=f"invalid step: {exc}")
    verdict, result = _payload_verdict(cert, honest, ctx)
    if not verdict or result is None:
        return verdict
    if verdict.nonzero_index not in transcript.image():
        return Verdict(ok=False, reason="nonzero coordinate outside the image")
    rebased = Transcript(
        source=transcript.source,
        degree=transcript.degree,
        steps=transcript.steps,
        derived=honest,
    )
    m = MAX_RELIFT
    if cert.precision_demo is not None:
        m = min(cert.precision_demo.precision, MAX_RELIFT)
    try:
        lifted = lift(result, m)
        x = rebased.pull_back(lifted.x)
    except (PadicError, ValueError) as exc:
        return Verdict(ok=False, reason=f"lift failed: {exc}")
    big_a, big_b = original.form_values(x, ctx.k)
    va, vb = _scale_valuations(rebased, p)
    res_a, res_b = vp_rational(big_a, p), vp_rational(big_b, p)
    if res_a < m - va or res_b < m - vb:
        return Verdict(
            ok=False,
            reason=f"residual valuations ({res_a}, {res_b}) below {m}",
        )
    idx = _source_index(rebased, x, lifted.nonzero_index)
    if idx is None:
        return Verdict(ok=False, reason="lifted solution is trivial on the input")
    logger.debug(
        f"verified {cert.kind.value}: residuals ({res_a}, {res_b}) at M={m}"
    )
    return Verdict(ok=True, nonzero_index=idx)


@jaxtyped(typechecker=beartype)
def verify_counterexample(p: int) -> DescentTrace:
    """Descent proof for the k = p - 1, s = k^2 + 1 system, plus a check
    that `solve` finds no solution there.

    Raises:
        NotApplicable: If p <= 3.
        InvalidInput: If p is not prime.
        InternalError: If the trace fails or `solve` claims a solution.

    """
    trace = build_descent(p)
    verdict = verify_descent(trace)
    if not verdict:
        msg = f"descent trace for p={p} failed: {verdict.reason}"
        logger.error(msg)
        raise InternalError(msg)
    system = counterexample_system(p)
    cert = solve(system, p, p - 1)
    if cert.kind in SOLUTION_KINDS:
        msg = f"solve returned {cert.kind.value} on an insoluble system"
        logger.error(msg)
        raise InternalError(msg)
    logger.info(
        f"counterexample p={p}: descent verified, solve gave {cert.kind.value}"
    )
    return trace


@jaxtyped(typechecker=beartype)
def descent_certificate(p: int) -> Certificate:
    """The counterexample system's insolubility, as a certificate."""
    trace = verify_counterexample(p)
    system = counterexample_system(p)
    return Certificate(
        kind=CertificateKind.INSOLUBILITY_DESCENT,
        p=str(p),
        k=p - 1,
        transcript=TranscriptModel.from_transcript(
            Transcript.start(system, p - 1)
        ),
        route="descent",
        descent=trace,
    ).sealed()


@jaxtyped(typechecker=beartype)
def solve_file(
    data: SystemFile, settings: SolverSettings | None = None
) -> Certificate:
    """`solve` on a parsed input file."""
    return solve(data.to_system(), data.prime, data.k, settings=settings)

