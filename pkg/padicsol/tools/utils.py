import os
import random

import numpy as np
from klogr import get_logger

from padicsol.core import DiagLinSystem

logger = get_logger()

SEED_ENV = "PADIC_GLOBAL_SEED"
max_seed_value = np.iinfo(np.uint32).max
min_seed_value = np.iinfo(np.uint32).min


def _env_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    try:
        return 0 if raw is None else int(raw)
    except ValueError:
        return 0


def seed_everything(seed: int | None = None, *, verbose: bool = True) -> int:
    """Seed the `random` module and the global NumPy RNG.

    Also exports `PADIC_GLOBAL_SEED` so subprocesses (and a later call
    with `seed=None`) reuse the same value.

    Args:
        seed: Seed value. If `None`, read from `PADIC_GLOBAL_SEED`;
            `0` when unset or unparsable.
        verbose: Log the chosen seed.

    Returns:
        The seed actually applied. Values outside the uint32 range
            become `0`.

    """
    seed = _env_seed() if seed is None else int(seed)
    if not (min_seed_value <= seed <= max_seed_value):
        seed = 0
    if verbose:
        logger.info(f"Seed set to {seed}")
    os.environ[SEED_ENV] = str(seed)
    random.seed(seed)
    np.random.seed(seed)  # noqa: NPY002
    return seed


def random_system(
    p: int, k: int, s: int, rng: np.random.Generator
) -> DiagLinSystem:
    """Draw a system with unit parts in [1, p) and levels in [0, k).

    Only level-0 variables get a (unit) linear coefficient, so the result
    is of type A with every level populated at random.
    """
    levels = rng.integers(0, k, size=s)
    units = rng.integers(1, p, size=(2, s))
    a = [int(u) * p ** int(v) for u, v in zip(units[0], levels, strict=True)]
    b = [int(u) if v == 0 else 0 for u, v in zip(units[1], levels, strict=True)]
    return DiagLinSystem.of(a, b)
