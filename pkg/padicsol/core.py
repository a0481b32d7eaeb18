"""System data model, valuations and the equivalence-transform transcript.

A `DiagLinSystem` holds the coefficient vectors of

    a_1 x_1^k + ... + a_s x_s^k = 0,    b_1 x_1 + ... + b_s x_s = 0.

Engines never edit a system in place: they record `TransformStep`s in a
`Transcript`, which can replay the chain on the source system and pull any
solution of the derived system back to the source. Each step is monomial:
every old variable is either zeroed or set to `c_i * y_j` for one new
variable `y_j`, and the two equations are scaled by nonzero rationals.
"""

from collections.abc import Iterable, Sequence
from fractions import Fraction
from functools import cached_property

from beartype import beartype
from klogr import get_logger
from pydantic import ConfigDict
from pydantic.dataclasses import dataclass

from padicsol._errors import InternalError, InvalidTransform
from padicsol._types import INF, PadicContext, SystemType, Valuation
from padicsol.tools.cache import fingerprint, jaxtyped

logger = get_logger()

Rational = int | Fraction


@jaxtyped(typechecker=beartype)
def vp(n: int, p: int) -> Valuation:
    """Return the exact exponent e with p^e || n, or INF for n = 0.

    Args:
        n (int): Any integer.
        p (int): A prime.

    Returns:
        Valuation: The p-adic valuation of `n`.

    """
    if n == 0:
        return INF
    n = abs(n)
    e = 0
    # Strip large powers first so huge valuations stay cheap.
    step, power = 1, p
    while n % power == 0:
        n //= power
        e += step
        step, power = step * 2, power * power
    while n % p == 0:
        n //= p
        e += 1
    return e


@jaxtyped(typechecker=beartype)
def vp_rational(q: Rational, p: int) -> Valuation:
    """Valuation of a rational number (numerator minus denominator)."""
    q = Fraction(q)
    if q == 0:
        return INF
    return vp(q.numerator, p) - vp(q.denominator, p)


@jaxtyped(typechecker=beartype)
def unit_part(n: int, p: int) -> int:
    """Return u with n = p^vp(n) * u and p not dividing u (n != 0)."""
    if n == 0:
        msg = "unit part of zero is undefined"
        raise ValueError(msg)
    return n // p ** int(vp(n, p))


@jaxtyped(typechecker=beartype)
def residue(q: Rational, modulus: int) -> int:
    """Reduce a p-integral rational modulo `modulus`.

    The denominator must be invertible modulo `modulus`.
    """
    q = Fraction(q)
    return q.numerator * pow(q.denominator, -1, modulus) % modulus


@jaxtyped(typechecker=beartype)
def kth_power_residue(x: int, ctx: PadicContext) -> int:
    """Return x^k mod p^gamma, checking the unit-power collapse.

    For k = p^tau (p - 1) every unit k-th power is 1 modulo p^gamma and
    every multiple of p has k-th power 0, so the result is 1 or 0.

    Raises:
        ContextNotApplicable: If k is not of the form p^tau (p - 1).
        InternalError: If the collapse law fails (arithmetic bug).

    """
    modulus = ctx.modulus
    value = pow(x, ctx.k, modulus)
    expected = 0 if x % ctx.p == 0 else 1
    if value != expected:
        msg = f"unit-power collapse failed: {x}^{ctx.k} = {value} mod {modulus}"
        raise InternalError(msg)
    return value


@dataclass(config=ConfigDict(extra="forbid", frozen=True), kw_only=True)
class DiagLinSystem:
    """One diagonal degree-k form and one linear form in s variables."""

    a: tuple[int, ...]
    """Degree-k coefficients."""
    b: tuple[int, ...]
    """Linear coefficients."""

    def __post_init__(self) -> None:
        """Check that both vectors have the same nonzero length.

        Derived systems may shrink to one variable; inputs are held to
        s >= 2 by the driver.
        """
        if len(self.a) != len(self.b):
            msg = f"a and b differ in length: {len(self.a)} != {len(self.b)}"
            raise ValueError(msg)
        if not self.a:
            msg = "a system needs at least one variable"
            raise ValueError(msg)

    @classmethod
    def of(cls, a: Iterable[int], b: Iterable[int]) -> "DiagLinSystem":
        """Build a system from any integer iterables."""
        return cls(a=tuple(int(v) for v in a), b=tuple(int(v) for v in b))

    @property
    def s(self) -> int:
        """Number of variables."""
        return len(self.a)

    @cached_property
    def fingerprint(self) -> int:
        """xxhash fingerprint of the coefficient vectors."""
        return fingerprint("DiagLinSystem", self.a, self.b)

    def form_values(
        self, x: Sequence[Rational], k: int
    ) -> tuple[Rational, Rational]:
        """Evaluate (A(x), B(x)) exactly."""
        if len(x) != self.s:
            msg = f"point has {len(x)} coordinates, system has {self.s}"
            raise ValueError(msg)
        big_a = sum(
            (ai * xi**k for ai, xi in zip(self.a, x, strict=True) if xi),
            start=0,
        )
        big_b = sum(
            (bi * xi for bi, xi in zip(self.b, x, strict=True) if xi),
            start=0,
        )
        return big_a, big_b

    def residual_valuations(
        self, x: Sequence[Rational], k: int, p: int
    ) -> tuple[Valuation, Valuation]:
        """Return (v_p(A(x)), v_p(B(x)))."""
        big_a, big_b = self.form_values(x, k)
        return vp_rational(big_a, p), vp_rational(big_b, p)

    def restricted(self, indices: Sequence[int]) -> "DiagLinSystem":
        """Subsystem on the given variable indices (in that order)."""
        return DiagLinSystem.of(
            (self.a[i] for i in indices), (self.b[i] for i in indices)
        )


@dataclass(config=ConfigDict(extra="forbid", frozen=True), kw_only=True)
class SystemStats:
    """Valuation statistics of a system snapshot (never cached across
    transforms).
    """

    nu: tuple[Valuation, ...]
    """v_p(a_i), INF for a_i = 0."""
    mu: tuple[Valuation, ...]
    """v_p(b_i), INF for b_i = 0."""
    upsilon: tuple[int, ...]
    """Count of finite nu_i in each residue class j mod k."""
    levels: tuple[Valuation, ...]
    """min(mu_i, nu_i)."""
    low_flags: tuple[bool, ...]
    """mu_i < nu_i."""
    type: SystemType
    """A when every b_i whose a_i is not a p-adic unit is divisible by p.
    Vacuous when every a_i is a unit, so a = (1, -1), b = (1, -1) is A."""

    def block(self, j: int, k: int) -> tuple[int, ...]:
        """Indices i with finite nu_i congruent to j mod k."""
        return tuple(
            i for i, v in enumerate(self.nu) if v != INF and int(v) % k == j
        )

    def at_level(self, level: int) -> tuple[int, ...]:
        """Indices whose level equals `level`."""
        return tuple(i for i, v in enumerate(self.levels) if v == level)


@jaxtyped(typechecker=beartype)
def stats(system: DiagLinSystem, ctx: PadicContext) -> SystemStats:
    """Compute the valuation statistics of `system` for (p, k) of `ctx`."""
    p, k = ctx.p, ctx.k
    nu = tuple(vp(ai, p) for ai in system.a)
    mu = tuple(vp(bi, p) for bi in system.b)
    upsilon = [0] * k
    for v in nu:
        if v != INF:
            upsilon[int(v) % k] += 1
    levels = tuple(min(n, m) for n, m in zip(nu, mu, strict=True))
    low = tuple(m < n for n, m in zip(nu, mu, strict=True))
    type_a = all(m > 0 for n, m in zip(nu, mu, strict=True) if n != 0)
    return SystemStats(
        nu=nu,
        mu=mu,
        upsilon=tuple(upsilon),
        levels=levels,
        low_flags=low,
        type=SystemType.A if type_a else SystemType.B,
    )


@dataclass(
    config=ConfigDict(
        extra="forbid", frozen=True, arbitrary_types_allowed=True
    ),
    kw_only=True,
)
class TransformStep:
    """Monomial substitution plus equation scaling.

    Old variable i becomes `multipliers[i] * y[targets[i]]`, or 0 when
    `targets[i]` is None. The new degree-k equation is `scale_a` times the
    substituted one, the new linear equation `scale_b` times its
    substitution. `offsets_a` (perturbation only) is added to the old
    degree-k coefficients before substituting; an honest replay ignores
    it.
    """

    targets: tuple[int | None, ...]
    """New variable index per old variable, None for zeroed."""
    multipliers: tuple[Fraction, ...]
    """Nonzero multiplier per mapped old variable (ignored when zeroed)."""
    new_size: int
    """Number of new variables."""
    scale_a: Fraction = Fraction(1)
    """Factor applied to the degree-k equation."""
    scale_b: Fraction = Fraction(1)
    """Factor applied to the linear equation."""
    offsets_a: tuple[int, ...] = ()
    """Additive perturbation of the old degree-k coefficients."""
    label: str = "transform"
    """Short tag naming the move (scale, shift, contract, ...)."""

    def __post_init__(self) -> None:
        """Reject zero multipliers, zero scales and bad indices."""
        if len(self.targets) != len(self.multipliers):
            msg = f"{self.label}: targets and multipliers differ in length"
            raise InvalidTransform(msg)
        if self.offsets_a and len(self.offsets_a) != len(self.targets):
            msg = f"{self.label}: offsets must cover every old variable"
            raise InvalidTransform(msg)
        if self.scale_a == 0 or self.scale_b == 0:
            msg = f"{self.label}: equation scale must be nonzero"
            raise InvalidTransform(msg)
        for i, (t, c) in enumerate(
            zip(self.targets, self.multipliers, strict=True)
        ):
            if t is None:
                continue
            if not 0 <= t < self.new_size:
                msg = f"{self.label}: target {t} of x_{i} out of range"
                raise InvalidTransform(msg)
            if c == 0:
                msg = f"{self.label}: zero multiplier on x_{i}"
                raise InvalidTransform(msg)

    @property
    def old_size(self) -> int:
        """Number of old variables."""
        return len(self.targets)


def _frac(v: Rational) -> Fraction:
    return v if isinstance(v, Fraction) else Fraction(v)


def make_step(
    targets: Sequence[int | None],
    multipliers: Sequence[Rational] | None = None,
    *,
    new_size: int | None = None,
    scale_a: Rational = 1,
    scale_b: Rational = 1,
    offsets_a: Sequence[int] = (),
    label: str = "transform",
) -> TransformStep:
    """Convenience constructor accepting ints and Fractions."""
    if multipliers is None:
        multipliers = [1] * len(targets)
    if new_size is None:
        mapped = [t for t in targets if t is not None]
        new_size = max(mapped) + 1 if mapped else 0
    return TransformStep(
        targets=tuple(targets),
        multipliers=tuple(_frac(c) for c in multipliers),
        new_size=new_size,
        scale_a=_frac(scale_a),
        scale_b=_frac(scale_b),
        offsets_a=tuple(offsets_a),
        label=label,
    )


def identity_step(s: int) -> TransformStep:
    """The identity substitution on s variables."""
    return make_step(list(range(s)), label="identity")


def scaling_step(
    multipliers: Sequence[Rational],
    *,
    scale_a: Rational = 1,
    scale_b: Rational = 1,
    label: str = "scale",
) -> TransformStep:
    """x_i -> c_i y_i on every variable, with equation scales."""
    return make_step(
        list(range(len(multipliers))),
        multipliers,
        scale_a=scale_a,
        scale_b=scale_b,
        label=label,
    )


def permutation_step(order: Sequence[int]) -> TransformStep:
    """New variable j is old variable order[j]."""
    targets: list[int | None] = [None] * len(order)
    for j, i in enumerate(order):
        targets[i] = j
    if any(t is None for t in targets):
        msg = f"not a permutation: {list(order)}"
        raise InvalidTransform(msg)
    return make_step(targets, label="permute")


def selection_step(
    keep: Sequence[int],
    old_size: int,
    multipliers: Sequence[Rational] | None = None,
    *,
    scale_a: Rational = 1,
    scale_b: Rational = 1,
    label: str = "select",
) -> TransformStep:
    """Keep the listed old variables (as new 0, 1, ...), zero the rest."""
    targets: list[int | None] = [None] * old_size
    mults: list[Rational] = [1] * old_size
    for j, i in enumerate(keep):
        targets[i] = j
        if multipliers is not None:
            mults[i] = multipliers[j]
    return make_step(
        targets,
        mults,
        new_size=len(keep),
        scale_a=scale_a,
        scale_b=scale_b,
        label=label,
    )


def grouping_step(
    groups: Sequence[Sequence[tuple[int, Rational]]],
    old_size: int,
    *,
    scale_a: Rational = 1,
    scale_b: Rational = 1,
    label: str = "contract",
) -> TransformStep:
    """Merge each group of (old index, multiplier) into one new variable.

    Old variables outside every group are zeroed.
    """
    targets: list[int | None] = [None] * old_size
    mults: list[Rational] = [1] * old_size
    for j, group in enumerate(groups):
        for i, c in group:
            if targets[i] is not None:
                msg = f"{label}: x_{i} appears in two groups"
                raise InvalidTransform(msg)
            targets[i] = j
            mults[i] = c
    return make_step(
        targets,
        mults,
        new_size=len(groups),
        scale_a=scale_a,
        scale_b=scale_b,
        label=label,
    )


@jaxtyped(typechecker=beartype)
def apply_transform(
    system: DiagLinSystem,
    step: TransformStep,
    k: int,
    *,
    honest: bool = False,
) -> DiagLinSystem:
    """Substitute `step` into `system` and return the derived system.

    Args:
        system (DiagLinSystem): The system before the step.
        step (TransformStep): The substitution.
        k (int): The degree of the diagonal form.
        honest (bool): Ignore the perturbation offsets of the step.

    Raises:
        InvalidTransform: If sizes mismatch or a derived coefficient is not
            an integer.

    """
    if step.old_size != system.s:
        msg = f"{step.label}: step expects {step.old_size} variables, system has {system.s}"
        raise InvalidTransform(msg)
    new_a = [Fraction(0)] * step.new_size
    new_b = [Fraction(0)] * step.new_size
    for i, (t, c) in enumerate(
        zip(step.targets, step.multipliers, strict=True)
    ):
        if t is None:
            continue
        ai = system.a[i]
        if step.offsets_a and not honest:
            ai += step.offsets_a[i]
        new_a[t] += ai * c**k
        new_b[t] += system.b[i] * c
    out_a, out_b = [], []
    for ca, cb in zip(new_a, new_b, strict=True):
        ca *= step.scale_a
        cb *= step.scale_b
        if ca.denominator != 1 or cb.denominator != 1:
            msg = f"{step.label}: derived coefficient ({ca}, {cb}) is not integral"
            raise InvalidTransform(msg)
        out_a.append(ca.numerator)
        out_b.append(cb.numerator)
    return DiagLinSystem.of(out_a, out_b)


@dataclass(
    config=ConfigDict(
        extra="forbid", frozen=True, arbitrary_types_allowed=True
    ),
    kw_only=True,
)
class Transcript:
    """Ordered transform steps from `source` to `derived`."""

    source: DiagLinSystem
    """The system the chain starts from."""
    degree: int
    """k, needed to substitute into the degree-k form."""
    steps: tuple[TransformStep, ...] = ()
    """The recorded steps, oldest first."""
    derived: DiagLinSystem | None = None
    """Result of replaying the steps (filled by `start` / `then`)."""

    @classmethod
    def start(cls, source: DiagLinSystem, degree: int) -> "Transcript":
        """An empty transcript whose derived system is `source`."""
        return cls(source=source, degree=degree, derived=source)

    @property
    def system(self) -> DiagLinSystem:
        """The derived system."""
        if self.derived is None:
            return self.replay()
        return self.derived

    def then(self, step: TransformStep) -> "Transcript":
        """Append a step and compute the new derived system."""
        derived = apply_transform(self.system, step, self.degree)
        logger.debug(f"transcript step {step.label}: s {step.old_size} -> {step.new_size}")
        return Transcript(
            source=self.source,
            degree=self.degree,
            steps=(*self.steps, step),
            derived=derived,
        )

    def chain(self, other: "Transcript") -> "Transcript":
        """Append the steps of a transcript that starts at our derived."""
        out = self
        for step in other.steps:
            out = out.then(step)
        return out

    def replay(self, *, honest: bool = False) -> DiagLinSystem:
        """Recompute the derived system from the source."""
        system = self.source
        for step in self.steps:
            system = apply_transform(system, step, self.degree, honest=honest)
        return system

    @property
    def perturbed(self) -> bool:
        """True when some step carries perturbation offsets."""
        return any(any(step.offsets_a) for step in self.steps)

    def composite_map(self) -> tuple[tuple[int, Fraction] | None, ...]:
        """For each source variable, its (derived index, multiplier) or None."""
        current: list[tuple[int, Fraction] | None] = [
            (i, Fraction(1)) for i in range(self.source.s)
        ]
        for step in self.steps:
            nxt: list[tuple[int, Fraction] | None] = []
            for entry in current:
                if entry is None:
                    nxt.append(None)
                    continue
                idx, c = entry
                t = step.targets[idx]
                nxt.append(None if t is None else (t, c * step.multipliers[idx]))
            current = nxt
        return tuple(current)

    def image(self) -> frozenset[int]:
        """Derived indices reached by some source variable."""
        return frozenset(e[0] for e in self.composite_map() if e is not None)

    def pull_back(self, y: Sequence[Rational]) -> tuple[Fraction, ...]:
        """Map a derived solution back to a source solution."""
        return pull_back(self, y)


@jaxtyped(typechecker=beartype)
def pull_back(
    transcript: Transcript, y: Sequence[Rational]
) -> tuple[Fraction, ...]:
    """x_i = c_i * y_{j(i)} (or 0) through every step, newest first."""
    point = [_frac(v) for v in y]
    if len(point) != transcript.system.s:
        msg = f"derived point has {len(point)} coordinates, expected {transcript.system.s}"
        raise ValueError(msg)
    for step in reversed(transcript.steps):
        point = [
            Fraction(0) if t is None else c * point[t]
            for t, c in zip(step.targets, step.multipliers, strict=True)
        ]
    return tuple(point)


@jaxtyped(typechecker=beartype)
def pair_minor(
    system: DiagLinSystem, x: Sequence[int], i: int, j: int, k: int
) -> int:
    """b_i a_j x_j^(k-1) - b_j a_i x_i^(k-1), the pivot minor at (i, j)."""
    return (
        system.b[i] * system.a[j] * x[j] ** (k - 1)
        - system.b[j] * system.a[i] * x[i] ** (k - 1)
    )


@jaxtyped(typechecker=beartype)
def find_unit_minor(
    system: DiagLinSystem, x: Sequence[int], k: int, p: int
) -> tuple[int, int] | None:
    """Smallest (i, j), i < j, whose pivot minor is a unit mod p."""
    cols = [
        (system.a[i] * pow(xi, k - 1, p) % p, system.b[i] % p)
        for i, xi in enumerate(x)
    ]
    for i in range(len(cols)):
        ai, bi = cols[i]
        for j in range(i + 1, len(cols)):
            aj, bj = cols[j]
            if (bi * aj - bj * ai) % p:
                return i, j
    return None
