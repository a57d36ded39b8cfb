"""Exception types shared across the package.

Plain I/O problems (missing files, permissions, disk errors) surface as the
built-in ``OSError`` family; everything below marks a contract violation
specific to this package.
"""

from __future__ import annotations


class AfspError(Exception):
    """Base class for all package-specific errors."""


# --- corpus ---------------------------------------------------------------

class MalformedRecord(AfspError):
    """A corpus record could not be parsed or violates a field invariant."""

    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


class DuplicateId(AfspError):
    def __init__(self, pair_id: str):
        super().__init__(f"duplicate pair id {pair_id!r}")
        self.pair_id = pair_id


class MixedLanguagePair(AfspError):
    """Pairs within one corpus disagree on the language pair."""


class EmptyFile(AfspError):
    """Input file contains no records."""


class TestSizeTooLarge(AfspError):
    """Requested test split does not leave at least one demonstration pair."""

    __test__ = False  # keep pytest from collecting this as a test class


class VersionMismatch(AfspError):
    """Binary artifact has an unknown magic/version header or is truncated."""


# --- embedding ------------------------------------------------------------

class EmptyText(AfspError):
    """Text is empty (or yields no tokens) where content is required."""


class ZeroVector(AfspError):
    """A vector with (near-)zero norm cannot be L2-normalized."""


# --- retrieval ------------------------------------------------------------

class DimensionMismatch(AfspError):
    """Operands have incompatible embedding dimensions."""


class FingerprintMismatch(AfspError):
    """Index was built with a different embedding table or projections."""


class EmptyQuery(AfspError):
    """Query text is empty or yields no tokens."""


# --- prompting ------------------------------------------------------------

class EmptyInput(AfspError):
    """Input sentence for prompt rendering is empty."""


class EmptyOutput(AfspError):
    """Nothing remains of a raw model output after extraction."""


# --- degeneration ---------------------------------------------------------

class NoOpPerturbation(AfspError):
    """An operation failed to change the text after the retry budget."""


class MissingTranslator(AfspError):
    """Back-translation requested without a configured translator or mock."""


class MissingEmbeddingTable(AfspError):
    """Token replacement requested without an embedding table or synonym map."""


# --- reranker -------------------------------------------------------------

class DegenerateDataset(AfspError):
    """Training data is too small or has no score variation."""


class NonFiniteLoss(AfspError):
    """Training loss became NaN or infinite."""


class EmptyCandidateList(AfspError):
    """rank() called with no candidates."""


# --- llm client -----------------------------------------------------------

class NetworkFailure(AfspError):
    """Endpoint unreachable or kept failing after the retry budget."""


class RateLimited(AfspError):
    """Endpoint returned 429 and retries were exhausted."""

    def __init__(self, message: str, retry_after: float | None = None):
        super().__init__(message)
        self.retry_after = retry_after


class MalformedResponse(AfspError):
    """Endpoint response is not valid chat-completions JSON."""


class AllCandidatesEmpty(AfspError):
    """Every returned completion was empty after extraction."""


class ScriptMiss(AfspError):
    """Mock client received a prompt it has no scripted answer for."""


# --- metrics --------------------------------------------------------------

class LengthMismatch(AfspError):
    """Hypothesis and reference lists have different lengths."""


class EmptyCorpus(AfspError):
    """Metric called on zero sentence pairs."""


# --- pipeline -------------------------------------------------------------

class StageError(AfspError):
    """Wraps an error from one pipeline stage with its stage label."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause
