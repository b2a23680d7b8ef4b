"""Exception taxonomy shared across the pipeline.

Every error raised by droidvet derives from DroidvetError so callers can
catch the whole family; the CLI maps subfamilies to stable exit codes.
"""

from __future__ import annotations


class DroidvetError(Exception):
    """Base class for all droidvet errors."""


# --- configuration / schema ---

class SchemaError(DroidvetError):
    """Input document does not match its declared schema."""

    def __init__(self, message: str, *, path: str | None = None,
                 line: int | None = None, column: int | None = None):
        loc = []
        if path:
            loc.append(f"at {path}")
        if line is not None:
            loc.append(f"line {line}" + (f", column {column}" if column is not None else ""))
        super().__init__(message + (f" ({'; '.join(loc)})" if loc else ""))
        self.path = path
        self.line = line
        self.column = column


class ConfigError(DroidvetError):
    """Run configuration is invalid or references missing files."""


# --- core-schema lifecycle ---

class MissingPoC(DroidvetError):
    """ValidatedTP promotion attempted without a PoC evidence reference."""


class IllegalTransition(DroidvetError):
    """Finding lifecycle may only move speculative -> validated/refuted."""


# --- apk extraction ---

class NotAnArchive(DroidvetError):
    """File does not carry a ZIP signature."""


class TruncatedArchive(DroidvetError):
    """ZIP signature present but the central directory is unreadable."""


class OversizeApk(DroidvetError):
    """APK exceeds the configured size cap."""


class MalformedChunk(DroidvetError):
    """Binary manifest contains an unexpected or ill-sized chunk."""


class StringPoolOutOfBounds(DroidvetError):
    """Binary manifest references a string outside the pool."""


class UnsupportedEncoding(DroidvetError):
    """Binary manifest string data cannot be decoded."""


class DecompilerUnavailable(DroidvetError):
    """Configured decompiler adapter cannot be reached."""


class DecompilerFailed(DroidvetError):
    def __init__(self, exit_status: int, stderr_excerpt: str):
        super().__init__(f"decompiler exited {exit_status}: {stderr_excerpt[:400]}")
        self.exit_status = exit_status
        self.stderr_excerpt = stderr_excerpt


# --- scanner ingestion ---

class NoAdapter(DroidvetError):
    """No report adapter registered for the producing tool."""


class UnparseableReport(DroidvetError):
    """Whole-body parse failure, distinct from per-item drops."""


# --- model backends ---

class BackendError(DroidvetError):
    """Model backend returned an unusable or malformed response."""


class ProviderError(BackendError):
    def __init__(self, message: str, status: int | None = None):
        super().__init__(message)
        self.status = status


class TimeoutExceeded(DroidvetError):
    """A call exceeded its configured wall-clock budget."""


class ContextOverflow(DroidvetError):
    """Prompt input exceeds the token budget even after chunking."""


class DegenerateOutput(DroidvetError):
    """Aggregation returned more findings than it was given."""


class EmptySourceTree(DroidvetError):
    """Analysis requested over a tree with no retained files."""


# --- tool registry / devices ---

class UnknownTool(DroidvetError):
    """Tool name not present in the registry."""


class AccessDenied(DroidvetError):
    """Role is not granted the requested tool (policy violation)."""


class ArgValidation(DroidvetError):
    """Tool call arguments do not match the parameter schema."""


class DeviceUnavailable(DroidvetError):
    """Device backend cannot be reached (no emulator/device attached)."""


class StepBudgetExceeded(DroidvetError):
    """Per-task tool-call cap or identical-call repetition limit hit."""


# --- metrics / replay ---

class ZeroAlerts(DroidvetError):
    """Efficiency ratio undefined for a tool that reported no alerts."""


class UnreplayableBackend(DroidvetError):
    """Transcript was recorded against a backend that cannot be replayed."""


class EvidenceIntegrityError(DroidvetError):
    """Stored evidence content does not match its recorded digest."""
