from klogr import get_logger

from padicsol.descent import counterexample_system
from padicsol.driver import descent_certificate, verify

logger = get_logger()


def main() -> None:
    """Main function to demonstrate the insolubility descent for p = 5."""
    p = 5
    system = counterexample_system(p)
    logger.info(f"k={p - 1}, s={system.s}: a={system.a}, b={system.b}")
    cert = descent_certificate(p)
    assert cert.descent is not None
    for level in cert.descent.levels:
        logger.info(
            f"level {level.level}: block {level.block},"
            f" other exponents {level.other_exponents}"
        )
    verdict = verify(cert, system)
    logger.info(f"verdict: {verdict.ok} ({cert.descent.conclusion})")
    logger.success(f"Descent certificate {cert.fingerprint} verified")


if __name__ == "__main__":
    main()
