"""Small value types shared across padicsol: the arithmetic frame and tags.

`PadicContext` is the only place where the exponents tau and gamma are
derived from (p, k); every congruence modulus used by the engines is read
from it.
"""

import math
from enum import Enum
from math import gcd

from pydantic import ConfigDict
from pydantic.dataclasses import dataclass
from sympy import isprime

from padicsol._errors import ContextNotApplicable, InvalidInput

Valuation = int | float
"""A p-adic valuation: a non-negative int, or `INF` for zero."""

INF: float = math.inf

MIN_DEGREE = 4


class EngineTag(str, Enum):
    """Which engine the dispatch predicate selects for (k, p)."""

    CONTRACT = "contract"
    PM1 = "pm1"
    PPM1 = "ppm1"
    POW2 = "pow2"


class CertificateKind(str, Enum):
    """Kinds of certificate a solve can emit."""

    EXACT_RATIONAL = "exact_rational"
    HENSEL_WITNESS = "hensel_witness"
    NEWTON_LINE = "newton_line"
    INSOLUBILITY_DESCENT = "insolubility_descent"
    UNRESOLVED = "unresolved"


class SystemType(str, Enum):
    """Type A: level-0 variables are exactly the unit-a variables."""

    A = "A"
    B = "B"


def _p_exponent(n: int, p: int) -> int:
    e = 0
    while n % p == 0:
        n //= p
        e += 1
    return e


@dataclass(config=ConfigDict(extra="forbid", frozen=True), kw_only=True)
class PadicContext:
    """Arithmetic frame (p, k) with the derived exponents.

    Build it with `PadicContext.of(p, k)`; the remaining fields are derived
    and validated in `__post_init__`.
    """

    p: int
    """The prime."""
    k: int
    """The degree of the diagonal form (k >= 4)."""
    tau: int | None = None
    """tau with k = p^tau (p - 1), or None when k has no such shape."""
    gamma: int | None = None
    """Congruence exponent: tau + 1 (odd p) or tau + 2 (p = 2)."""
    d: int = 1
    """gcd(k, p - 1)."""
    k0: int = 1
    """The part of k coprime to p and free of d: k = p^v d k0."""
    vpk: int = 0
    """v_p(k)."""

    def __post_init__(self) -> None:
        """Validate the prime, the degree and the derived exponents."""
        if self.p < 2 or not isprime(self.p):
            msg = f"p must be prime, got {self.p}"
            raise InvalidInput(msg)
        if self.k < MIN_DEGREE:
            msg = f"degree k must be >= {MIN_DEGREE}, got {self.k}"
            raise InvalidInput(msg)
        tau, gamma = self._tau_gamma(self.p, self.k)
        vpk = _p_exponent(self.k, self.p)
        d = gcd(self.k, self.p - 1)
        if (self.tau, self.gamma) != (tau, gamma) or self.vpk != vpk:
            msg = f"inconsistent exponents for p={self.p}, k={self.k}"
            raise InvalidInput(msg)
        if self.d != d or self.k != self.p**vpk * d * self.k0:
            msg = f"inconsistent d/k0 for p={self.p}, k={self.k}"
            raise InvalidInput(msg)

    @staticmethod
    def _tau_gamma(p: int, k: int) -> tuple[int | None, int | None]:
        if k % (p - 1):
            return None, None
        rest = k // (p - 1)
        tau = _p_exponent(rest, p)
        if rest != p**tau:
            return None, None
        return tau, tau + 1 if p > 2 else tau + 2

    @classmethod
    def of(cls, p: int, k: int) -> "PadicContext":
        """Derive every field from (p, k)."""
        if p < 2 or not isprime(p):
            msg = f"p must be prime, got {p}"
            raise InvalidInput(msg)
        if k < MIN_DEGREE:
            msg = f"degree k must be >= {MIN_DEGREE}, got {k}"
            raise InvalidInput(msg)
        tau, gamma = cls._tau_gamma(p, k)
        vpk = _p_exponent(k, p)
        d = gcd(k, p - 1)
        return cls(
            p=p,
            k=k,
            tau=tau,
            gamma=gamma,
            d=d,
            k0=k // (p**vpk * d),
            vpk=vpk,
        )

    @property
    def has_tau(self) -> bool:
        """True when k = p^tau (p - 1)."""
        return self.tau is not None

    def require_tau(self) -> tuple[int, int]:
        """Return (tau, gamma) or raise ContextNotApplicable."""
        if self.tau is None or self.gamma is None:
            msg = f"k={self.k} is not of the form p^tau (p - 1) for p={self.p}"
            raise ContextNotApplicable(msg)
        return self.tau, self.gamma

    @property
    def modulus(self) -> int:
        """p^gamma (requires tau)."""
        _, gamma = self.require_tau()
        return self.p**gamma

    @property
    def newton_exponent(self) -> int:
        """2 v_p(k) + 1: congruence exponent for one-variable Newton lifts."""
        return 2 * self.vpk + 1
