"""Lifting congruence solutions to p-adic solutions.

Three shapes are supported:

* the pair lift: two variables carry the whole system, the rest is frozen,
  and a one-variable polynomial is lifted one p-adic digit at a time with
  the derivative valuation fixed at v_p(k);
* classic Newton iteration for one polynomial with a unit (or small)
  derivative;
* the line witness: a point P and direction D with B(P) = B(D) = 0, so
  every x = P + tD solves the linear equation and only A(P + tD) = 0 in t
  needs a root.

Lifted solutions are returned as exact rationals whose denominators are
prime to p; the linear residual is an exact zero and the degree-k residual
has valuation at least the requested precision.
"""

from fractions import Fraction
from math import gcd

from beartype import beartype
from klogr import get_logger
from pydantic import ConfigDict
from pydantic.dataclasses import dataclass
from sympy import Poly, symbols

try:
    from sympy.core.intfunc import igcdex
except ImportError:  # sympy < 1.13
    from sympy.core.numbers import igcdex

from padicsol._errors import InternalError, PreconditionViolated
from padicsol._types import INF, PadicContext, Valuation
from padicsol.core import DiagLinSystem, pair_minor, residue, vp
from padicsol.tools.cache import jaxtyped
from padicsol.tools.config import DEFAULT_PRECISION

logger = get_logger()

_T = symbols("t")
_MAX_NEWTON_STEPS = 200


@dataclass(config=ConfigDict(extra="forbid", frozen=True), kw_only=True)
class Verdict:
    """Outcome of a total check: ok, or the first failed condition."""

    ok: bool
    """True when every condition holds."""
    reason: str | None = None
    """Name and values of the first failed condition."""
    nonzero_index: int | None = None
    """Coordinate certified nonzero in the lifted solution."""

    def __bool__(self) -> bool:
        """Truthiness follows `ok`."""
        return self.ok


@dataclass(
    config=ConfigDict(
        extra="forbid", frozen=True, arbitrary_types_allowed=True
    ),
    kw_only=True,
)
class HenselWitness:
    """Residues x mod p^gamma plus a pivot pair with a unit minor."""

    x: tuple[int, ...]
    """The witness point, entries in [0, p^gamma)."""
    pivot: tuple[int, int]
    """0-based indices (i, j) of the two lifted variables."""
    ctx: PadicContext
    """Frame; must have tau defined."""
    system: DiagLinSystem
    """The system the witness certifies."""


@dataclass(config=ConfigDict(extra="forbid", frozen=True), kw_only=True)
class HenselTrace:
    """Record of one pair lift."""

    phi: tuple[int, ...]
    """Coefficients of the lifted polynomial, constant term first."""
    xi: tuple[int, ...]
    """The digits xi_l for l = start_level, start_level + 1, ..."""
    start_level: int
    """Level of xi[0] (gamma)."""
    derivative_valuation: int
    """v_p(phi'(xi_l)), equal to v_p(k) at every level."""
    swapped: bool = False
    """True when the two slots were exchanged before lifting."""


@dataclass(config=ConfigDict(extra="forbid", frozen=True), kw_only=True)
class PairLift:
    """Output of `lift_pair`, in the caller's slot order."""

    y: tuple[Fraction, Fraction]
    """The lifted pair (p-integral rationals)."""
    unit_slot: int
    """0 or 1: the slot guaranteed to be a p-adic unit."""
    trace: HenselTrace
    """Lift record."""


@dataclass(config=ConfigDict(extra="forbid", frozen=True), kw_only=True)
class LiftedSolution:
    """A p-integral point with residual valuations at least `precision`."""

    x: tuple[Fraction, ...]
    """The point."""
    nonzero_index: int
    """A coordinate that is nonzero in the exact p-adic solution."""
    precision: int
    """The requested M."""
    trace: HenselTrace | None = None
    """Pair-lift record, when the point came from a pair lift."""

    def residues(self, p: int) -> tuple[int, ...]:
        """The point reduced mod p^precision."""
        modulus = p**self.precision
        return tuple(residue(v, modulus) for v in self.x)


@jaxtyped(typechecker=beartype)
def check_witness(w: HenselWitness) -> Verdict:
    """Check A(x) = 0 mod p^gamma, B(x) = 0 mod p and the pivot minor.

    Never raises; the verdict names the first failed condition.
    """
    ctx, system = w.ctx, w.system
    if ctx.gamma is None:
        return Verdict(ok=False, reason=f"k={ctx.k} has no tau for p={ctx.p}")
    p, k = ctx.p, ctx.k
    if len(w.x) != system.s:
        return Verdict(
            ok=False,
            reason=f"point has {len(w.x)} coordinates, system has {system.s}",
        )
    i, j = w.pivot
    if not (0 <= i < system.s and 0 <= j < system.s) or i == j:
        return Verdict(ok=False, reason=f"bad pivot {w.pivot}")
    big_a, big_b = system.form_values(w.x, k)
    if big_a % ctx.modulus:
        return Verdict(
            ok=False,
            reason=f"A(x) = {big_a % ctx.modulus} != 0 mod {p}^{ctx.gamma}",
        )
    if big_b % p:
        return Verdict(ok=False, reason=f"B(x) = {big_b % p} != 0 mod {p}")
    minor = pair_minor(system, w.x, i, j, k)
    if minor % p == 0:
        return Verdict(ok=False, reason=f"pivot minor {minor} is divisible by {p}")
    # The lifted unit is x_j when p does not divide b_i a_j x_j.
    unit = j if (system.b[i] * system.a[j] * w.x[j]) % p else i
    return Verdict(ok=True, nonzero_index=unit)


def bezout(a: int, b: int) -> tuple[int, int, int]:
    """Python ints (u, v, g) with u a + v b = g = gcd(a, b) >= 0."""
    u, v, g = igcdex(a, b)
    return int(u), int(v), int(g)


def _phi(
    a1: int, a2: int, b1: int, b2: int, big_a: int, big_b: int, k: int
) -> Poly:
    return Poly(
        a1 * (big_b - b2 * _T) ** k + a2 * b1**k * _T**k - big_a * b1**k,
        _T,
        domain="ZZ",
    )


@jaxtyped(typechecker=beartype)
def lift_pair(
    a: tuple[int, int],
    b: tuple[int, int],
    big_a: int,
    big_b: int,
    x: tuple[int, int],
    ctx: PadicContext,
    precision: int = DEFAULT_PRECISION,
) -> PairLift:
    """Lift a non-singular pair solution to precision `precision`.

    Solves a_1 y_1^k + a_2 y_2^k = A and b_1 y_1 + b_2 y_2 = B starting from
    integers x with a_1 x_1^k + a_2 x_2^k = A mod p^gamma, b_1 x_1 + b_2 x_2
    = B exactly, and p not dividing b_1 a_2 x_2^(k-1) - b_2 a_1 x_1^(k-1).

    After swapping so that p does not divide b_1 a_2 x_2, the polynomial

        phi(t) = a_1 (B - b_2 t)^k + a_2 b_1^k t^k - A b_1^k

    has phi(x_2) = 0 mod p^gamma and v_p(phi'(x_2)) = v_p(k). Each step
    sets xi_(l+1) = xi_l + p^(l - v_p(k)) h with h the unique residue making
    phi(xi_(l+1)) = 0 mod p^(l+1). The lift runs v_p(k) levels past
    `precision`, so y_2 agrees with the exact root mod p^precision. y_1 is
    then (B - b_2 y_2) / b_1.

    Raises:
        PreconditionViolated: If the congruence, the exact linear equation
            or the minor condition fails.

    """
    _, gamma = ctx.require_tau()
    p, k = ctx.p, ctx.k
    a1, a2 = a
    b1, b2 = b
    x1, x2 = x
    if (a1 * x1**k + a2 * x2**k - big_a) % p**gamma:
        msg = f"a1 x1^k + a2 x2^k != A mod {p}^{gamma}"
        raise PreconditionViolated(msg)
    if b1 * x1 + b2 * x2 != big_b:
        msg = f"b1 x1 + b2 x2 = {b1 * x1 + b2 * x2} != B = {big_b}"
        raise PreconditionViolated(msg)
    if (b1 * a2 * x2 ** (k - 1) - b2 * a1 * x1 ** (k - 1)) % p == 0:
        msg = "pivot minor is not a unit"
        raise PreconditionViolated(msg)
    swapped = (b1 * a2 * x2) % p == 0
    if swapped:
        a1, a2, b1, b2, x1, x2 = a2, a1, b2, b1, x2, x1
    tau = ctx.vpk
    phi = _phi(a1, a2, b1, b2, big_a, big_b, k)
    dphi = phi.diff(_T)
    xi = x2 % p**gamma
    digits = [xi]
    for level in range(gamma, precision + tau):
        value = int(phi.eval(xi))
        slope = int(dphi.eval(xi))
        if vp(slope, p) != tau:
            msg = f"v_p(phi'(xi)) = {vp(slope, p)} at level {level}, expected {tau}"
            logger.error(msg)
            raise InternalError(msg)
        if value % p**level:
            msg = f"phi(xi) not divisible by {p}^{level}"
            logger.error(msg)
            raise InternalError(msg)
        h = -(value // p**level) * pow(slope // p**tau, -1, p) % p
        xi += p ** (level - tau) * h
        digits.append(xi)
    y2 = xi % p ** max(precision, 1)
    y1 = Fraction(big_b - b2 * y2, b1)
    trace = HenselTrace(
        phi=tuple(int(c) for c in reversed(phi.all_coeffs())),
        xi=tuple(digits),
        start_level=gamma,
        derivative_valuation=tau,
        swapped=swapped,
    )
    if swapped:
        return PairLift(y=(Fraction(y2), y1), unit_slot=0, trace=trace)
    return PairLift(y=(y1, Fraction(y2)), unit_slot=1, trace=trace)


@jaxtyped(typechecker=beartype)
def solve_from_witness(
    w: HenselWitness, precision: int = DEFAULT_PRECISION
) -> LiftedSolution:
    """Turn a checked witness into a solution to precision `precision`.

    The non-pivot coordinates are frozen at their witness residues. The
    pivot pair is reordered so that p does not divide b_i a_j x_j, divided
    through by q = gcd(b_i, b_j), corrected by multiples of p so the
    linear equation holds exactly, lifted with `lift_pair` and scaled back
    by 1/q.

    Raises:
        PreconditionViolated: If `check_witness(w)` fails.

    """
    verdict = check_witness(w)
    if not verdict:
        msg = f"witness rejected: {verdict.reason}"
        raise PreconditionViolated(msg)
    ctx, system = w.ctx, w.system
    p, k = ctx.p, ctx.k
    i, j = w.pivot
    if (system.b[i] * system.a[j] * w.x[j]) % p == 0:
        i, j = j, i
    point: list[Fraction] = [Fraction(v) for v in w.x]
    tail = [m for m in range(system.s) if m not in (i, j)]
    big_a = -sum(system.a[m] * w.x[m] ** k for m in tail)
    big_b = -sum(system.b[m] * w.x[m] for m in tail)
    b1, b2 = system.b[i], system.b[j]
    a1, a2 = system.a[i], system.a[j]
    q = gcd(b1, b2)
    b1q, b2q = b1 // q, b2 // q
    z1, z2 = q * w.x[i], q * w.x[j]
    gap = big_b - b1q * z1 - b2q * z2
    if gap % p:
        msg = "linear residual of the pivot pair is not divisible by p"
        logger.error(msg)
        raise InternalError(msg)
    c = gap // p
    u, v, g = bezout(b1q, b2q)
    if g != 1:
        msg = f"reduced linear coefficients are not coprime: gcd = {g}"
        raise InternalError(msg)
    w1, w2 = z1 + p * u * c, z2 + p * v * c
    if (a1 * w1**k + a2 * w2**k - big_a * q**k) % ctx.modulus:
        msg = f"correction broke the congruence mod {p}^{ctx.gamma}"
        logger.error(msg)
        raise InternalError(msg)
    lifted = lift_pair(
        (a1, a2), (b1q, b2q), big_a * q**k, big_b, (w1, w2), ctx, precision
    )
    point[i] = lifted.y[0] / q
    point[j] = lifted.y[1] / q
    unit = j if lifted.unit_slot == 1 else i
    logger.debug(f"lifted pivot ({i}, {j}) to precision {precision}, unit slot {unit}")
    return LiftedSolution(
        x=tuple(point),
        nonzero_index=unit,
        precision=precision,
        trace=lifted.trace,
    )


def _newton(
    f: Poly, x0: int, p: int, precision: int, delta: int
) -> int:
    """Newton iteration from x0 where v_p(f(x0)) > 2 delta = 2 v_p(f'(x0))."""
    df = f.diff(f.gens[0])
    work = p ** (precision + 2 * delta + 1)
    x = x0
    for _ in range(_MAX_NEWTON_STEPS):
        value = int(f.eval(x))
        if value == 0 or vp(value, p) - delta >= precision:
            return x % p**precision
        slope = int(df.eval(x))
        x = residue(Fraction(x) - Fraction(value, slope), work)
    msg = f"Newton iteration did not reach precision {precision}"
    logger.error(msg)
    raise InternalError(msg)


@jaxtyped(typechecker=beartype)
def classic_hensel(
    f: Poly, x0: int, p: int, precision: int = DEFAULT_PRECISION
) -> int:
    """Root of `f` congruent to x0 mod p, to precision `precision`.

    Args:
        f (Poly): Integer polynomial in one variable.
        x0 (int): Approximate root.
        p (int): The prime.
        precision (int): Target M; the result r has v_p(f(r)) >= M.

    Raises:
        PreconditionViolated: If p does not divide f(x0) or divides f'(x0).

    """
    value = int(f.eval(x0))
    slope = int(f.diff(f.gens[0]).eval(x0))
    if value % p:
        msg = f"f(x0) = {value} is not divisible by {p}"
        raise PreconditionViolated(msg)
    if slope % p == 0:
        msg = f"f'(x0) = {slope} is divisible by {p}"
        raise PreconditionViolated(msg)
    return _newton(f, x0, p, precision, 0)


@dataclass(
    config=ConfigDict(
        extra="forbid", frozen=True, arbitrary_types_allowed=True
    ),
    kw_only=True,
)
class LineWitness:
    """Base point P and direction D with B(P) = B(D) = 0, plus t0."""

    point: tuple[int, ...]
    """P."""
    direction: tuple[int, ...]
    """D."""
    t0: int
    """Approximate root of A(P + tD) in t."""
    ctx: PadicContext
    """Frame (any k)."""
    system: DiagLinSystem
    """The system the witness certifies."""

    def line_polynomial(self) -> Poly:
        """g(t) = A(P + tD) as an integer polynomial."""
        k = self.ctx.k
        const = sum(
            ai * pi**k
            for ai, pi, di in zip(
                self.system.a, self.point, self.direction, strict=True
            )
            if di == 0
        )
        expr = const + sum(
            ai * (pi + di * _T) ** k
            for ai, pi, di in zip(
                self.system.a, self.point, self.direction, strict=True
            )
            if di != 0
        )
        return Poly(expr, _T, domain="ZZ")


def _content_valuation(f: Poly, p: int) -> Valuation:
    return min((vp(int(c), p) for c in f.all_coeffs()), default=INF)


@jaxtyped(typechecker=beartype)
def check_line_witness(w: LineWitness) -> Verdict:
    """Check B(P) = B(D) = 0, the Newton condition and a nonzero coordinate.

    With g = A(P + tD) divided by its p-content, the condition is
    v_p(g(t0)) > 2 v_p(g'(t0)); the root t then agrees with t0 to
    e = v_p(g(t0)) - v_p(g'(t0)) digits, so coordinate i stays nonzero when
    v_p(P_i + t0 D_i) < v_p(D_i) + e.
    """
    system, p = w.system, w.ctx.p
    if len(w.point) != system.s or len(w.direction) != system.s:
        return Verdict(ok=False, reason="point/direction length mismatch")
    if not any(w.direction):
        return Verdict(ok=False, reason="direction is zero")
    b_point = sum(bi * v for bi, v in zip(system.b, w.point, strict=True))
    b_dir = sum(bi * v for bi, v in zip(system.b, w.direction, strict=True))
    if b_point != 0:
        return Verdict(ok=False, reason=f"B(P) = {b_point} != 0")
    if b_dir != 0:
        return Verdict(ok=False, reason=f"B(D) = {b_dir} != 0")
    g = w.line_polynomial()
    theta = _content_valuation(g, p)
    at_t0 = [
        pi + w.t0 * di for pi, di in zip(w.point, w.direction, strict=True)
    ]
    if theta == INF:
        # A vanishes on the whole line.
        idx = next((m for m, v in enumerate(at_t0) if v), None)
        if idx is None:
            return Verdict(ok=False, reason="P + t0 D is the zero vector")
        return Verdict(ok=True, nonzero_index=idx)
    g_hat = g.quo_ground(p ** int(theta))
    value = vp(int(g_hat.eval(w.t0)), p)
    slope = vp(int(g_hat.diff(_T).eval(w.t0)), p)
    if slope == INF or not value > 2 * slope:
        return Verdict(
            ok=False,
            reason=f"Newton condition fails: v(g(t0))={value}, v(g'(t0))={slope}",
        )
    agree = value - slope
    for m, (v, d) in enumerate(zip(at_t0, w.direction, strict=True)):
        if v and vp(v, p) < vp(d, p) + agree:
            return Verdict(ok=True, nonzero_index=m)
    return Verdict(ok=False, reason="no coordinate is certified nonzero")


@jaxtyped(typechecker=beartype)
def solve_from_line_witness(
    w: LineWitness, precision: int = DEFAULT_PRECISION
) -> LiftedSolution:
    """x = P + tD with t a Newton root of A(P + tD) to precision M.

    Raises:
        PreconditionViolated: If `check_line_witness(w)` fails.

    """
    verdict = check_line_witness(w)
    if not verdict:
        msg = f"line witness rejected: {verdict.reason}"
        raise PreconditionViolated(msg)
    p = w.ctx.p
    g = w.line_polynomial()
    theta = _content_valuation(g, p)
    if theta == INF:
        t = w.t0
    else:
        g_hat = g.quo_ground(p ** int(theta))
        delta = vp(int(g_hat.diff(_T).eval(w.t0)), p)
        t = _newton(g_hat, w.t0, p, precision, int(delta))
    x = tuple(
        Fraction(pi + t * di)
        for pi, di in zip(w.point, w.direction, strict=True)
    )
    return LiftedSolution(
        x=x, nonzero_index=verdict.nonzero_index, precision=precision
    )

