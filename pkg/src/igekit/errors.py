"""Exception hierarchy shared across the toolkit.

Grouped by the surface that raises them so the CLI can map families to
exit codes (usage/config -> 1, data -> 2, provider -> 3).
"""

from __future__ import annotations


class IgekitError(Exception):
    """Base class for all toolkit errors."""


class UsageConfigError(IgekitError):
    """Invalid command-line usage or run configuration."""


# --- data errors (dataset ingestion, splits, evaluation inputs) -----------

class DataError(IgekitError):
    """Base class for dataset and evaluation-input errors."""


class MissingFile(DataError):
    pass


class SchemaError(DataError):
    """Input file violates the expected schema; names the offending field."""


class BoundsError(DataError):
    """An annotation box falls outside its image; reported with ann_id."""


class MissingCounterparts(DataError):
    """Context variant requested but no non-interactable annotations exist."""


class EmptyFold(DataError):
    """Dataset too small to honor the split ratio at grouping granularity."""


class FoldMismatch(DataError):
    """A detection references a scene outside the evaluated fold."""


class InconsistentFlags(DataError):
    """Ranked match flags claim more true positives than ground truths."""


# --- provider errors (chat, embedding, grounding backends) ----------------

class ProviderError(IgekitError):
    """Base class for model-backend errors."""


class TransportError(ProviderError):
    """Network-level failure; retryable with backoff."""


class RateLimited(TransportError):
    """Backend signalled throttling (HTTP 429 or equivalent)."""


class ReplayMiss(ProviderError):
    """Replay mode saw a request with no recorded response."""


class ParseError(ProviderError):
    """Model output could not be parsed into the expected structure."""

    def __init__(self, message: str, raw: str = ""):
        super().__init__(message)
        self.raw = raw


class ProtocolError(ProviderError):
    """Grounding adapter replied with a malformed payload."""


class DimensionMismatch(ProviderError):
    """Cosine similarity requested between incompatible embedding vectors."""


class ZeroVector(ProviderError):
    """Cosine similarity requested for a zero-norm vector."""


# --- pipeline / simulator ---------------------------------------------------

class CropError(IgekitError):
    """A candidate box degenerated below 1x1 pixels after clamping."""


class DomainError(IgekitError):
    """Argument outside the mathematical domain of an operation."""
