"""End-to-end solve and verify, including tampered certificates."""

from __future__ import annotations

import pytest

from padicsol import (
    Certificate,
    CertificateKind,
    DiagLinSystem,
    EngineTag,
    InvalidInput,
    SolverSettings,
    solve,
    verify,
    verify_counterexample,
)
from padicsol._errors import NotApplicable
from padicsol.certificate import WitnessModel
from padicsol.driver import descent_certificate, exact_shortcut


@pytest.fixture(scope="module")
def cycling_cert(cycling_system: DiagLinSystem) -> Certificate:
    """Certificate for the k = 4 cycling example at p = 2."""
    return solve(cycling_system, 2, 4, precision=12)


def test_cycling_system_is_solved(cycling_cert: Certificate) -> None:
    assert cycling_cert.kind == CertificateKind.HENSEL_WITNESS
    assert cycling_cert.engine == EngineTag.POW2
    assert cycling_cert.route == "cycling"
    assert cycling_cert.fingerprint == cycling_cert.digest()
    demo = cycling_cert.precision_demo
    assert demo is not None
    assert demo.precision == 12
    assert demo.residual_b == "inf"
    assert demo.residual_a == "inf" or int(demo.residual_a) >= 12


def test_verify_accepts(
    cycling_cert: Certificate, cycling_system: DiagLinSystem
) -> None:
    verdict = verify(cycling_cert, cycling_system)
    assert verdict
    assert verdict.nonzero_index is not None


def test_verify_rejects_bad_pivot(
    cycling_cert: Certificate, cycling_system: DiagLinSystem
) -> None:
    assert cycling_cert.witness is not None
    forged = cycling_cert.model_copy(
        update={
            "witness": WitnessModel(x=cycling_cert.witness.x, pivot=(0, 1))
        }
    ).sealed()
    reason = verify(forged, cycling_system).reason or ""
    assert "witness congruence failed" in reason


def test_verify_rejects_zero_multiplier(
    cycling_cert: Certificate, cycling_system: DiagLinSystem
) -> None:
    steps = list(cycling_cert.transcript.steps)
    last = steps[-1]
    steps[-1] = last.model_copy(
        update={"multipliers": ["0", *last.multipliers[1:]]}
    )
    transcript = cycling_cert.transcript.model_copy(update={"steps": steps})
    forged = cycling_cert.model_copy(
        update={"transcript": transcript}
    ).sealed()
    reason = verify(forged, cycling_system).reason or ""
    assert reason.startswith("invalid step")


def test_verify_rejects_unsealed_edit(
    cycling_cert: Certificate, cycling_system: DiagLinSystem
) -> None:
    edited = cycling_cert.model_copy(update={"route": "elsewhere"})
    assert verify(edited, cycling_system).reason == "fingerprint mismatch"


def test_verify_rejects_other_input(cycling_cert: Certificate) -> None:
    other = DiagLinSystem.of([1] * 18, [1] * 18)
    reason = verify(cycling_cert, other).reason
    assert reason == "source system differs from the input"


def test_verify_survives_a_round_trip(
    cycling_cert: Certificate, cycling_system: DiagLinSystem
) -> None:
    assert verify(Certificate.loads(cycling_cert.dumps()), cycling_system)


@pytest.mark.parametrize(
    ("a", "b", "point", "route"),
    [
        ((3, -3), (1, -1), [1, 1], "opposite-pair"),
        ((2, -2), (1, 1), [1, -1], "opposite-pair"),
        ((1, 1, -2), (1, 1, -2), [-2, -2, -2], "small-height"),
        ((5, 0, 7), (1, 0, 1), [0, 1, 0], "null-variable"),
    ],
)
def test_exact_shortcuts(
    a: tuple[int, ...], b: tuple[int, ...], point: list[int], route: str
) -> None:
    system = DiagLinSystem.of(a, b)
    assert exact_shortcut(system, 4) == (point, route)
    cert = solve(system, 5, 4)
    assert cert.kind == CertificateKind.EXACT_RATIONAL
    assert cert.exact == [str(v) for v in point]
    assert verify(cert, system)


def test_pure_diagonal_system() -> None:
    system = DiagLinSystem.of([1] * 5, [0] * 5)
    cert = solve(system, 5, 4)
    assert cert.kind == CertificateKind.NEWTON_LINE
    assert cert.line is not None
    assert verify(cert, system)


@pytest.mark.parametrize(
    ("a", "p", "k"), [([1, 1], 4, 4), ([1, 1], 5, 3), ([1], 5, 4)]
)
def test_solve_rejects_bad_frames(a: list[int], p: int, k: int) -> None:
    system = DiagLinSystem.of(a, [1] * len(a))
    with pytest.raises(InvalidInput):
        solve(system, p, k)


def test_counterexample_is_unresolved(
    counterexample_p5: DiagLinSystem,
) -> None:
    cert = solve(counterexample_p5, 5, 4)
    assert cert.kind == CertificateKind.UNRESOLVED
    assert verify(cert, counterexample_p5).reason == "unresolved certificate"


def test_descent_certificate(counterexample_p5: DiagLinSystem) -> None:
    cert = descent_certificate(5)
    assert cert.kind == CertificateKind.INSOLUBILITY_DESCENT
    assert verify(cert, counterexample_p5)
    other = DiagLinSystem.of([1] * 17, [1] * 17)
    assert verify(cert, other).reason == "source system differs from the input"


def test_verify_counterexample_frames() -> None:
    assert verify_counterexample(5).k == 4
    with pytest.raises(NotApplicable):
        verify_counterexample(3)


def test_settings_validation() -> None:
    with pytest.raises(ValueError, match="budget"):
        SolverSettings(budget=0)
    with pytest.raises(ValueError, match="precision"):
        SolverSettings(precision=-1)


def test_settings_from_env(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setenv("PADIC_PRECISION", "7")
    monkeypatch.setenv("PADIC_WITNESS_BUDGET", "lots")
    settings = SolverSettings.from_env()
    assert settings.precision == 7
    assert settings.budget == 10_000_000
    assert SolverSettings.from_env(precision=3, budget=None).precision == 3
