"""`padicsol` command line: JSON on stdout, a rich summary on stderr.

Exit codes: 0 success or verified, 1 verified negative (insoluble or not
verified), 2 unresolved, 3 invalid input, 4 budget exceeded.
"""

import json
from pathlib import Path

import tyro
from klogr import get_logger
from rich.console import Console
from rich.table import Table

from padicsol._errors import BudgetExceeded, InvalidInput, NotApplicable
from padicsol._types import CertificateKind, PadicContext
from padicsol.certificate import (
    Certificate,
    SystemFile,
    TranscriptModel,
    load_certificate,
    load_system,
)
from padicsol.driver import (
    SOLUTION_KINDS,
    descent_certificate,
    solve_file,
    verify,
)
from padicsol.normalize import normalize
from padicsol.oracle import (
    CongruenceQuery,
    find_nonsingular,
    gamma_star_bruteforce,
)
from padicsol.tools.config import EngineChoice, SolverSettings

logger = get_logger()

EXIT_OK = 0
EXIT_NEGATIVE = 1
EXIT_UNRESOLVED = 2
EXIT_INVALID = 3
EXIT_BUDGET = 4

console = Console(stderr=True)


def _emit(payload: dict[str, object] | str) -> None:
    if isinstance(payload, str):
        print(payload)
    else:
        print(json.dumps(payload, indent=2))


def _summary(title: str, rows: dict[str, object]) -> None:
    table = Table(title=title, show_header=False)
    table.add_column("field", style="bold cyan")
    table.add_column("value")
    for key, value in rows.items():
        table.add_row(key, str(value))
    console.print(table)


def _certificate_rows(cert: Certificate) -> dict[str, object]:
    rows: dict[str, object] = {
        "kind": cert.kind.value,
        "engine": cert.engine.value if cert.engine else "-",
        "route": cert.route or "-",
        "steps": len(cert.transcript.steps),
    }
    demo = cert.precision_demo
    if demo is not None:
        rows["precision"] = demo.precision
        rows["residuals (A, B)"] = f"({demo.residual_a}, {demo.residual_b})"
        rows["nonzero x"] = demo.nonzero_index
    if cert.note:
        rows["note"] = cert.note
    return rows


def solve(
    input: tyro.conf.Positional[Path],  # noqa: A002
    precision: int | None = None,
    budget: int | None = None,
    engine: EngineChoice = "auto",
    output: Path | None = None,
) -> int:
    """Solve a system and print its certificate.

    Args:
        input: JSON file `{"k", "p", "a", "b"}` with decimal strings.
        precision: Lift precision M of the precision demo.
        budget: Search state budget (overrides PADIC_WITNESS_BUDGET).
        engine: Force one engine instead of the dispatch choice.
        output: Also write the certificate to this file.

    """
    data = load_system(input)
    settings = SolverSettings.from_env(
        precision=precision, budget=budget, engine=engine
    )
    cert = solve_file(data, settings)
    _emit(cert.dumps())
    if output is not None:
        output.write_text(cert.dumps())
    _summary("solve", _certificate_rows(cert))
    if cert.kind in SOLUTION_KINDS:
        logger.success(f"{cert.kind.value} certificate")
        return EXIT_OK
    return EXIT_UNRESOLVED


def verify_cmd(
    certificate: tyro.conf.Positional[Path],
    input: tyro.conf.Positional[Path],  # noqa: A002
) -> int:
    """Check a certificate against its input system.

    Args:
        certificate: Certificate JSON written by `solve`.
        input: The input system JSON.

    """
    cert = load_certificate(certificate)
    system = load_system(input).to_system()
    verdict = verify(cert, system)
    _emit(
        {
            "verified": verdict.ok,
            "reason": verdict.reason,
            "nonzero_index": verdict.nonzero_index,
        }
    )
    _summary(
        "verify",
        {
            "kind": cert.kind.value,
            "verified": verdict.ok,
            "reason": verdict.reason,
        },
    )
    if verdict:
        logger.success("certificate verified")
        return EXIT_OK
    return EXIT_NEGATIVE


def normalize_cmd(input: tyro.conf.Positional[Path]) -> int:  # noqa: A002
    """Precondition and condition a system; print the result."""
    data = load_system(input)
    ctx = PadicContext.of(data.prime, data.k)
    report = normalize(data.to_system(), ctx)
    _emit(
        {
            "shift": report.shift,
            "upsilon_after": list(report.upsilon_after),
            "perturbation_exponent": report.perturbation_exponent,
            "system": SystemFile.from_system(
                report.system, data.prime, data.k
            ).model_dump(),
            "transcript": TranscriptModel.from_transcript(
                report.transcript
            ).model_dump(),
        }
    )
    _summary(
        "normalize",
        {"shift": report.shift, "upsilon": report.upsilon_after},
    )
    return EXIT_OK


def oracle(
    input: tyro.conf.Positional[Path],  # noqa: A002
    modulus_exp: int | None = None,
    budget: int | None = None,
) -> int:
    """Exhaustively search for a non-singular congruence solution.

    Args:
        input: The input system JSON.
        modulus_exp: g in A = 0 mod p^g; gamma by default.
        budget: Search state budget.

    """
    data = load_system(input)
    settings = SolverSettings.from_env(budget=budget)
    query = CongruenceQuery(
        system=data.to_system(),
        ctx=PadicContext.of(data.prime, data.k),
        modulus_exponent=modulus_exp,
        budget=settings.budget,
    )
    report = find_nonsingular(query)
    _emit(
        {
            "found": report.found,
            "witness": None
            if report.witness is None
            else [str(v) for v in report.witness],
            "nonsingular_pivot": report.nonsingular_pivot,
            "exhausted": report.exhausted,
            "states": report.states,
        }
    )
    _summary("oracle", {"found": report.found, "states": report.states})
    return EXIT_OK if report.found else EXIT_NEGATIVE


def gamma_star(
    k: tyro.conf.Positional[int],
    p: tyro.conf.Positional[int],
    l: tyro.conf.Positional[int],  # noqa: E741
    budget: int | None = None,
) -> int:
    """Smallest t with a unit-coordinate zero for every unit c_1..c_t."""
    settings = SolverSettings.from_env(budget=budget)
    report = gamma_star_bruteforce(k, p, l, settings.budget)
    _emit({"gamma_star": report.gamma_star, "exhausted": report.exhausted})
    _summary(f"gamma*({k}, {p}^{l})", {"gamma_star": report.gamma_star})
    return EXIT_OK


def counterexample(p: tyro.conf.Positional[int]) -> int:
    """Descent proof that the k = p - 1, s = k^2 + 1 system is insoluble."""
    cert = descent_certificate(p)
    _emit(cert.dumps())
    levels = len(cert.descent.levels) if cert.descent else 0
    _summary(
        "counterexample",
        {"p": p, "s": len(cert.transcript.a), "levels": levels},
    )
    logger.success(f"descent verified for p={p}")
    if cert.kind != CertificateKind.INSOLUBILITY_DESCENT:
        return EXIT_NEGATIVE
    return EXIT_OK


COMMANDS = {
    "solve": solve,
    "verify": verify_cmd,
    "normalize": normalize_cmd,
    "oracle": oracle,
    "gamma-star": gamma_star,
    "counterexample": counterexample,
}


def run(args: list[str] | None = None) -> int:
    """Parse `args` and run one subcommand; returns the exit code."""
    try:
        return tyro.extras.subcommand_cli_from_dict(COMMANDS, args=args)
    except (InvalidInput, NotApplicable) as exc:
        console.print(f"[red]invalid input:[/red] {exc}")
        return EXIT_INVALID
    except BudgetExceeded as exc:
        console.print(f"[yellow]budget exceeded:[/yellow] {exc}")
        _emit({"budget_exceeded": True, "lower_bound": exc.lower_bound})
        return EXIT_BUDGET


def main() -> None:
    """Console script entry point."""
    raise SystemExit(run())


if __name__ == "__main__":
    main()
