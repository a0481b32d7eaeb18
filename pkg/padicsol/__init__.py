from importlib.metadata import version

from klogr import DEFAULT_VERBOSITY, LoggingRich, get_logger

from padicsol._errors import InvalidInput, PadicError
from padicsol._types import CertificateKind, EngineTag, PadicContext
from padicsol.certificate import Certificate, SystemFile
from padicsol.core import DiagLinSystem, Transcript
from padicsol.driver import solve, verify, verify_counterexample
from padicsol.tools.config import SolverSettings
from padicsol.tools.utils import seed_everything

__version__ = version("padicsol")


__all__ = [
    "DEFAULT_VERBOSITY",
    "Certificate",
    "CertificateKind",
    "DiagLinSystem",
    "EngineTag",
    "InvalidInput",
    "LoggingRich",
    "PadicContext",
    "PadicError",
    "SolverSettings",
    "SystemFile",
    "Transcript",
    "get_logger",
    "seed_everything",
    "solve",
    "verify",
    "verify_counterexample",
]
