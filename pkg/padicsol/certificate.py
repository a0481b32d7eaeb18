"""JSON models for input systems, transcripts and certificates.

Every integer travels as a decimal string and every rational as `"n/d"`,
so nothing is truncated to 64 bits. Inputs are parsed with json5 (comments
and trailing commas allowed); output is strict JSON.
"""

from fractions import Fraction
from pathlib import Path

import json5
import xxhash
from pydantic import BaseModel, ConfigDict, ValidationError

from padicsol._errors import InvalidInput
from padicsol._types import INF, CertificateKind, EngineTag, Valuation
from padicsol.core import DiagLinSystem, TransformStep, Transcript


def frac_str(v: Fraction | int) -> str:
    """`"n"` or `"n/d"`."""
    return str(Fraction(v))


def parse_frac(text: str) -> Fraction:
    """Inverse of `frac_str`.

    Raises:
        InvalidInput: If `text` is not an integer or a fraction.

    """
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError, AttributeError) as exc:
        msg = f"not a rational number: {text!r}"
        raise InvalidInput(msg) from exc


def parse_int(text: str | int) -> int:
    """Decimal string (or int) to int.

    Raises:
        InvalidInput: If `text` is not an integer.

    """
    value = parse_frac(str(text))
    if value.denominator != 1:
        msg = f"not an integer: {text!r}"
        raise InvalidInput(msg)
    return value.numerator


def valuation_str(v: Valuation) -> str:
    """`"inf"` for an exact zero."""
    return "inf" if v == INF else str(int(v))


class SystemFile(BaseModel):
    """`{"k": int, "p": "5", "a": ["1", ...], "b": ["1", ...]}`."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    k: int
    p: str
    a: list[str]
    b: list[str]

    @classmethod
    def from_system(
        cls, system: DiagLinSystem, p: int, k: int
    ) -> "SystemFile":
        """Serialize `system` with its frame."""
        return cls(
            k=k,
            p=str(p),
            a=[str(v) for v in system.a],
            b=[str(v) for v in system.b],
        )

    @property
    def prime(self) -> int:
        """p as an int."""
        return parse_int(self.p)

    def to_system(self) -> DiagLinSystem:
        """The coefficient vectors.

        Raises:
            InvalidInput: On non-integer entries or mismatched lengths.

        """
        a = [parse_int(v) for v in self.a]
        b = [parse_int(v) for v in self.b]
        if len(a) != len(b) or not a:
            msg = f"a and b must be nonempty and equally long ({len(a)}, {len(b)})"
            raise InvalidInput(msg)
        return DiagLinSystem.of(a, b)


class StepModel(BaseModel):
    """One `TransformStep`."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    targets: list[int | None]
    multipliers: list[str]
    new_size: int
    scale_a: str = "1"
    scale_b: str = "1"
    offsets_a: list[str] = []
    label: str = "transform"

    @classmethod
    def from_step(cls, step: TransformStep) -> "StepModel":
        """Serialize `step`."""
        return cls(
            targets=list(step.targets),
            multipliers=[frac_str(c) for c in step.multipliers],
            new_size=step.new_size,
            scale_a=frac_str(step.scale_a),
            scale_b=frac_str(step.scale_b),
            offsets_a=[str(o) for o in step.offsets_a],
            label=step.label,
        )

    def to_step(self) -> TransformStep:
        """Rebuild the step; its own validation rejects zero multipliers."""
        return TransformStep(
            targets=tuple(self.targets),
            multipliers=tuple(parse_frac(c) for c in self.multipliers),
            new_size=self.new_size,
            scale_a=parse_frac(self.scale_a),
            scale_b=parse_frac(self.scale_b),
            offsets_a=tuple(parse_int(o) for o in self.offsets_a),
            label=self.label,
        )


class TranscriptModel(BaseModel):
    """Source system plus every step, oldest first."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    degree: int
    a: list[str]
    b: list[str]
    steps: list[StepModel] = []

    @classmethod
    def from_transcript(cls, transcript: Transcript) -> "TranscriptModel":
        """Serialize `transcript` (the derived system is not stored)."""
        src = transcript.source
        return cls(
            degree=transcript.degree,
            a=[str(v) for v in src.a],
            b=[str(v) for v in src.b],
            steps=[StepModel.from_step(s) for s in transcript.steps],
        )

    def source(self) -> DiagLinSystem:
        """The recorded source system."""
        return DiagLinSystem.of(
            [parse_int(v) for v in self.a], [parse_int(v) for v in self.b]
        )

    def to_transcript(self) -> Transcript:
        """Rebuild by replaying every step from the source.

        Raises:
            InvalidTransform: If a step is malformed or does not apply.

        """
        out = Transcript.start(self.source(), self.degree)
        for step in self.steps:
            out = out.then(step.to_step())
        return out


class WitnessModel(BaseModel):
    """Residues mod p^gamma plus the pivot pair."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    x: list[str]
    pivot: tuple[int, int]


class LineModel(BaseModel):
    """Base point, direction and Newton start on a line."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    point: list[str]
    direction: list[str]
    t0: str


class PrecisionDemo(BaseModel):
    """A lifted solution pulled back to the input variables."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    precision: int
    x: list[str]
    residual_a: str
    residual_b: str
    nonzero_index: int


class DescentLevel(BaseModel):
    """One level of the insolubility descent.

    After the blocks below `level` are known to be divisible by p and the
    form has been divided by p^level, block `level` has coefficient 1 and
    every other block a coefficient p^e with e in `other_exponents`.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    level: int
    block: list[int]
    other_exponents: list[int]
    unit_counts: list[int]
    """t = 0..k: t unit k-th powers sum to t mod p, zero only for t = 0."""


class DescentTrace(BaseModel):
    """Replayable proof that the counterexample system has no primitive
    solution.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    p: str
    k: int
    s: int
    unit_powers: list[int]
    """x^k mod p for x = 1 .. p - 1 (all equal to 1)."""
    levels: list[DescentLevel]
    forced_index: int
    """The variable outside the diagonal form."""
    partner_index: int
    """Its partner in the linear relation x_partner + x_forced = 0."""
    conclusion: str


class Certificate(BaseModel):
    """Solver output; the transcript leads from the input to the system
    the payload lives on.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: CertificateKind
    p: str
    k: int
    transcript: TranscriptModel
    engine: EngineTag | None = None
    route: str = ""
    exact: list[str] | None = None
    witness: WitnessModel | None = None
    line: LineModel | None = None
    descent: DescentTrace | None = None
    precision_demo: PrecisionDemo | None = None
    note: str | None = None
    fingerprint: str = ""

    def digest(self) -> str:
        """xxh3 of everything but the fingerprint field."""
        body = self.model_dump_json(exclude={"fingerprint"})
        return str(xxhash.xxh3_64_intdigest(body.encode()))

    def sealed(self) -> "Certificate":
        """Copy with the fingerprint filled in."""
        return self.model_copy(update={"fingerprint": self.digest()})

    def dumps(self) -> str:
        """Strict JSON."""
        return self.model_dump_json(indent=2)

    @classmethod
    def loads(cls, text: str) -> "Certificate":
        """Parse json5 text.

        Raises:
            InvalidInput: If the text is not a certificate.

        """
        return _validate(cls, text)


def _validate(model: type[BaseModel], text: str):  # noqa: ANN202
    try:
        data = json5.loads(text)
        return model.model_validate(data)
    except ValidationError as exc:
        msg = f"malformed {model.__name__}: {exc.error_count()} error(s)"
        raise InvalidInput(msg) from exc
    except ValueError as exc:
        msg = f"unparsable {model.__name__} JSON: {exc}"
        raise InvalidInput(msg) from exc


def load_system(path: str | Path) -> SystemFile:
    """Read an input system file.

    Raises:
        InvalidInput: If the file is missing or malformed.

    """
    path = Path(path)
    if not path.is_file():
        msg = f"no such input file: {path}"
        raise InvalidInput(msg)
    return _validate(SystemFile, path.read_text())


def load_certificate(path: str | Path) -> Certificate:
    """Read a certificate file.

    Raises:
        InvalidInput: If the file is missing or malformed.

    """
    path = Path(path)
    if not path.is_file():
        msg = f"no such certificate file: {path}"
        raise InvalidInput(msg)
    return Certificate.loads(path.read_text())
