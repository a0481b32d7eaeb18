"""The sharpness counterexample: k = p - 1 and s = k^2 + 1.

The degree-k form is sum_j p^j (x_(jk)^k + ... + x_(jk+k-1)^k) over k
blocks of k variables, the linear form is x_(k^2-1) + x_(k^2). Unit k-th
powers are 1 mod p, so a block whose form vanishes mod p holds t unit
values with t = 0 mod p, hence t = 0. Working up the blocks every
variable of the degree form is divisible by p, the linear form then
forces the last variable, and no primitive solution is left.
"""

from beartype import beartype
from klogr import get_logger
from sympy import isprime

from padicsol._errors import InvalidInput, NotApplicable
from padicsol.certificate import DescentLevel, DescentTrace, parse_int
from padicsol.core import DiagLinSystem
from padicsol.hensel import Verdict
from padicsol.tools.cache import jaxtyped

logger = get_logger()

CONCLUSION = "every solution is divisible by p; no primitive solution exists"


@jaxtyped(typechecker=beartype)
def counterexample_system(p: int) -> DiagLinSystem:
    """The k^2 + 1 variable system for k = p - 1.

    Raises:
        InvalidInput: If p is not prime.
        NotApplicable: If p <= 3 (k would be below 4).

    """
    if not isprime(p):
        msg = f"p = {p} is not prime"
        raise InvalidInput(msg)
    if p <= 3:
        msg = f"the counterexample needs k = p - 1 >= 4, got p = {p}"
        raise NotApplicable(msg)
    k = p - 1
    a = [p**j for j in range(k) for _ in range(k)]
    a.append(0)
    b = [0] * (k * k - 1) + [1, 1]
    return DiagLinSystem.of(a, b)


def _other_exponents(level: int, k: int) -> list[int]:
    # Blocks below `level` were substituted x = p y (gaining p^k) and the
    # whole form divided by p^level.
    return [
        i + k - level if i < level else i - level
        for i in range(k)
        if i != level
    ]


@jaxtyped(typechecker=beartype)
def build_descent(p: int) -> DescentTrace:
    """Level-by-level descent for the counterexample at p."""
    system = counterexample_system(p)
    k = p - 1
    levels = [
        DescentLevel(
            level=j,
            block=list(range(j * k, (j + 1) * k)),
            other_exponents=_other_exponents(j, k),
            unit_counts=[t % p for t in range(k + 1)],
        )
        for j in range(k)
    ]
    trace = DescentTrace(
        p=str(p),
        k=k,
        s=system.s,
        unit_powers=[pow(x, k, p) for x in range(1, p)],
        levels=levels,
        forced_index=system.s - 1,
        partner_index=system.s - 2,
        conclusion=CONCLUSION,
    )
    logger.debug(f"descent for p={p}: {k} levels, s={system.s}")
    return trace


@jaxtyped(typechecker=beartype)
def verify_descent(trace: DescentTrace) -> Verdict:
    """Re-check every claim of `trace` from p alone. Total."""
    try:
        p = parse_int(trace.p)
        system = counterexample_system(p)
    except (InvalidInput, NotApplicable) as exc:
        return Verdict(ok=False, reason=f"bad prime: {exc}")
    k = p - 1
    if trace.k != k or trace.s != system.s:
        return Verdict(ok=False, reason=f"shape (k={trace.k}, s={trace.s})")
    powers = [pow(x, k, p) for x in range(1, p)]
    if trace.unit_powers != powers or any(v != 1 for v in powers):
        return Verdict(ok=False, reason="unit k-th powers are not all 1")
    if [lvl.level for lvl in trace.levels] != list(range(k)):
        return Verdict(ok=False, reason="levels are not 0 .. k - 1")
    for lvl in trace.levels:
        j = lvl.level
        block = list(range(j * k, (j + 1) * k))
        if lvl.block != block or any(system.a[i] != p**j for i in block):
            return Verdict(ok=False, reason=f"level {j}: wrong block")
        if any(system.b[i] for i in block if i != trace.partner_index):
            return Verdict(ok=False, reason=f"level {j}: block in linear form")
        exps = _other_exponents(j, k)
        if lvl.other_exponents != exps or min(exps) < 1:
            return Verdict(ok=False, reason=f"level {j}: exponents {exps}")
        counts = [t % p for t in range(k + 1)]
        if lvl.unit_counts != counts or 0 in counts[1:]:
            return Verdict(ok=False, reason=f"level {j}: unit count vanishes")
    forced, partner = trace.forced_index, trace.partner_index
    if system.a[forced] != 0 or system.b[forced] % p == 0:
        return Verdict(ok=False, reason="forced variable is not linear-only")
    others = [
        i for i, b in enumerate(system.b) if b and i not in (forced, partner)
    ]
    if others or system.b[partner] % p == 0 or partner >= k * k:
        return Verdict(ok=False, reason="linear form is not a two-term relation")
    if trace.conclusion != CONCLUSION:
        return Verdict(ok=False, reason="unexpected conclusion")
    return Verdict(ok=True)
