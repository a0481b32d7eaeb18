import numpy as np
from klogr import get_logger
from rich.console import Console
from rich.table import Table

from padicsol.driver import solve, verify
from padicsol.tools.utils import random_system, seed_everything

logger = get_logger()


def main() -> None:
    """Main function to demonstrate the k = p - 1 engine on random systems."""
    seed = seed_everything(7)
    rng = np.random.default_rng(seed)
    p, k = 5, 4
    s = k * k + 2
    table = Table(title=f"p={p}, k={k}, s={s}")
    for column in ("#", "kind", "route", "verified"):
        table.add_column(column)
    for n in range(8):
        system = random_system(p, k, s, rng)
        cert = solve(system, p, k)
        verdict = verify(cert, system)
        table.add_row(str(n), cert.kind.value, cert.route, str(verdict.ok))
    Console().print(table)
    logger.success("Random k = p - 1 sweep done")


if __name__ == "__main__":
    main()
