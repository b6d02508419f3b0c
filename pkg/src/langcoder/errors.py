"""Exception hierarchy shared by all pipeline stages.

Every failure mode downstream code is expected to branch on gets its own
class; anything raised by this package derives from LangcoderError.
"""

from __future__ import annotations


class LangcoderError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(LangcoderError):
    """A value violates a documented precondition or field invariant."""


class ContractViolation(LangcoderError):
    """A caller broke an explicit call-ordering or bound contract."""


class ConfigError(LangcoderError):
    """Bad or missing configuration (CLI exit code 3)."""


class TemplateError(LangcoderError):
    """A prompt template is malformed or rendered with unbound slots."""


class CorpusError(LangcoderError):
    """Corpus file unreadable or contains malformed records.

    ``line_errors`` carries (line_number, message) pairs for every bad record.
    """

    def __init__(self, message: str, line_errors: list[tuple[int, str]] | None = None):
        super().__init__(message)
        self.line_errors = line_errors or []


class InstructionParseError(LangcoderError):
    """Model output did not parse into a valid instruction set."""

    def __init__(self, message: str, found: list[str], missing: list[str]):
        super().__init__(message)
        self.found = found
        self.missing = missing


class ExtractionError(LangcoderError):
    """Instruction extraction failed even after the one allowed re-ask."""

    def __init__(self, message: str, raw_text: str):
        super().__init__(message)
        self.raw_text = raw_text


class InferenceError(LangcoderError):
    """Rank-conditioned inference failed for one candidate rank."""

    def __init__(self, message: str, rank: int):
        super().__init__(message)
        self.rank = rank


class RefinementError(LangcoderError):
    """The critic/decider dialogue ended without a usable decision."""

    def __init__(self, message: str, transcript: list | None = None):
        super().__init__(message)
        self.transcript = transcript or []


class SelectionError(LangcoderError):
    """Manual candidate selection was aborted after repeated bad input."""


class GatewayError(LangcoderError):
    """Base class for model-backend failures (CLI exit code 4)."""


class TransportError(GatewayError):
    """Network-level failure that persisted through all retries."""


class HttpStatusError(GatewayError):
    """The completion endpoint answered with a non-success status."""

    def __init__(self, message: str, status_code: int):
        super().__init__(message)
        self.status_code = status_code


class EmptyResponseError(GatewayError):
    """The backend produced empty assistant content."""


class MissingCassetteError(GatewayError):
    """Replay was asked for a request that was never recorded."""

    def __init__(self, digest: str):
        super().__init__(f"no cassette recorded for digest {digest}")
        self.digest = digest


class MissingFixtureError(GatewayError):
    """The mock backend has no fixture or default for a request."""

    def __init__(self, digest: str):
        super().__init__(f"no mock fixture matches digest {digest}")
        self.digest = digest


class StageError(LangcoderError):
    """A synthesis stage produced no usable code."""

    def __init__(self, message: str, stage: str):
        super().__init__(message)
        self.stage = stage


class IntegrationError(LangcoderError):
    """Snippet integration produced no usable program."""


class RepairError(LangcoderError):
    """A repair attempt produced no usable code."""


class WorkspaceError(LangcoderError):
    """Workspace preparation failed (e.g. missing data files)."""

    def __init__(self, message: str, missing: list[str] | None = None):
        super().__init__(message)
        self.missing = missing or []


class MetricError(LangcoderError):
    """Scoring was asked for something undefined (id mismatch, empty
    tables, single-class ROC input, wrong column count)."""


class PipelineError(LangcoderError):
    """The end-to-end run failed (CLI exit code 2)."""
