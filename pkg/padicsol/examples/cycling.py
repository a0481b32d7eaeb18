from klogr import get_logger

from padicsol.core import DiagLinSystem
from padicsol.driver import solve, verify

logger = get_logger()


def main() -> None:
    """Main function to demonstrate the degree-4 level-rotating transform.

    Fifteen unit coefficients outside the linear form and three copies of
    8 x^4 tied by x_16 + x_17 + x_18 leave three odd classes at niveau 3,
    so the 2-adic engine rotates the levels before contracting.
    """
    system = DiagLinSystem.of([1] * 15 + [8] * 3, [0] * 15 + [1] * 3)
    cert = solve(system, 2, 4, precision=12)
    logger.info(f"{cert.kind.value} via {cert.engine}/{cert.route}")
    for step in cert.transcript.steps:
        logger.info(f"  step {step.label}: -> {step.new_size} variables")
    demo = cert.precision_demo
    if demo is not None:
        logger.info(
            f"residual valuations ({demo.residual_a}, {demo.residual_b})"
            f" at M={demo.precision}"
        )
    verdict = verify(cert, system)
    if not verdict:
        logger.error(f"verification failed: {verdict.reason}")
        return
    logger.success(f"Certificate verified, x_{verdict.nonzero_index} != 0")


if __name__ == "__main__":
    main()
