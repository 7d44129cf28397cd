"""Exception types shared across the package."""

from __future__ import annotations


class DialogcutError(Exception):
    """Base class for all package errors."""


# --- subtitle parsing ---

class MalformedTimecode(DialogcutError):
    def __init__(self, message: str, block_index: int | None = None):
        super().__init__(message)
        self.block_index = block_index


class NonMonotoneTrack(DialogcutError):
    pass


# --- calibration ---

class NoAnchorsFound(DialogcutError):
    pass


class InsufficientAnchors(DialogcutError):
    pass


# --- boundary detection ---

class OracleUnavailable(DialogcutError):
    """Continuity oracle gave up after retries.

    ``committed`` holds the scene ranges that were already closed when the
    oracle died, so callers can persist partial progress.
    """

    def __init__(self, message: str, committed: tuple = ()):
        super().__init__(message)
        self.committed = committed


class JudgeUnavailable(DialogcutError):
    pass


# --- annotation ---

class MissingMedia(DialogcutError):
    pass


class SchemaViolation(DialogcutError):
    pass


class VocabViolation(DialogcutError):
    pass


class ScoreOutOfRange(DialogcutError):
    pass


class MissingSpeakerDescription(DialogcutError):
    pass


# --- metrics ---

class EmptyPartition(DialogcutError):
    pass


class EmptyReference(DialogcutError):
    pass


class TooManySpeakers(DialogcutError):
    pass


class DimensionMismatch(DialogcutError):
    pass


class UnknownGoldLabel(DialogcutError):
    pass


class EmptyInput(DialogcutError):
    pass


# --- manifest ---

class EmptyManifest(DialogcutError):
    pass


class RatioSumInvalid(DialogcutError):
    pass


class UnknownHardId(DialogcutError):
    pass


# --- configuration / pipeline ---

class ConfigError(DialogcutError):
    pass


class MissingInput(DialogcutError):
    pass
