"""Timed-text primitives: SRT parsing/serialization, millisecond timecodes,
and the text normalization every downstream text match runs on.

All times in this package are integer milliseconds since media start; there
is no floating-point time anywhere, so comparisons and round trips are exact.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, replace

from .errors import MalformedTimecode, NonMonotoneTrack

MS_PER_HOUR = 3_600_000
MS_PER_MINUTE = 60_000
MS_PER_SECOND = 1_000

_TIMECODE_RE = re.compile(
    r"^(?P<h>\d{1,3}):(?P<m>\d{2}):(?P<s>\d{2})[,.](?P<ms>\d{1,3})$"
)
_ARROW_RE = re.compile(r"\s+-->\s+")


def parse_timecode(text: str) -> int:
    """Parse ``HH:MM:SS,mmm`` (or ``.mmm``) into integer milliseconds."""
    m = _TIMECODE_RE.match(text.strip())
    if not m:
        raise MalformedTimecode(f"unparseable timecode {text!r}")
    h, mi, s = int(m.group("h")), int(m.group("m")), int(m.group("s"))
    if mi >= 60 or s >= 60:
        raise MalformedTimecode(f"minutes/seconds out of range in {text!r}")
    ms = int(m.group("ms").ljust(3, "0"))
    return h * MS_PER_HOUR + mi * MS_PER_MINUTE + s * MS_PER_SECOND + ms


def format_timecode(ms: int) -> str:
    """Format integer milliseconds as ``HH:MM:SS,mmm``."""
    if ms < 0:
        raise ValueError(f"negative timecode: {ms}")
    h, rem = divmod(ms, MS_PER_HOUR)
    mi, rem = divmod(rem, MS_PER_MINUTE)
    s, msec = divmod(rem, MS_PER_SECOND)
    return f"{h:02d}:{mi:02d}:{s:02d},{msec:03d}"


@dataclass(frozen=True)
class SubtitleEntry:
    """One subtitle block: 1-based file index, times in ms, raw text.

    ``text`` keeps the original line breaks; use :attr:`flat_text` for
    matching, which joins lines with a single space.
    """

    index: int
    start_ms: int
    end_ms: int
    text: str

    def __post_init__(self):
        if self.index < 1:
            raise ValueError(f"entry index must be positive, got {self.index}")
        if self.start_ms < 0:
            raise ValueError(f"negative start time: {self.start_ms}")
        if self.start_ms >= self.end_ms:
            raise ValueError(
                f"entry {self.index}: start {self.start_ms} >= end {self.end_ms}"
            )
        if not self.text.strip():
            raise ValueError(f"entry {self.index}: empty text")

    @property
    def flat_text(self) -> str:
        return " ".join(self.text.split())

    @property
    def duration_ms(self) -> int:
        return self.end_ms - self.start_ms

    @property
    def midpoint_ms(self) -> int:
        return (self.start_ms + self.end_ms) // 2


@dataclass(frozen=True)
class SubtitleTrack:
    """An ordered subtitle track plus provenance tag and quality flags."""

    entries: tuple[SubtitleEntry, ...]
    source_tag: str = ""
    flags: tuple[str, ...] = ()

    def __len__(self) -> int:
        return len(self.entries)

    def with_flag(self, flag: str) -> "SubtitleTrack":
        if flag in self.flags:
            return self
        return replace(self, flags=self.flags + (flag,))


@dataclass(frozen=True)
class AsrSegment:
    """A time-stamped ASR segment; confidence is optional."""

    start_ms: int
    end_ms: int
    text: str
    confidence: float | None = None

    def __post_init__(self):
        if self.start_ms >= self.end_ms:
            raise ValueError(f"ASR segment start {self.start_ms} >= end {self.end_ms}")
        if self.confidence is not None and not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence out of [0,1]: {self.confidence}")

    @property
    def duration_ms(self) -> int:
        return self.end_ms - self.start_ms


def parse_srt(raw: str, source_tag: str = "") -> SubtitleTrack:
    """Parse SRT text into a :class:`SubtitleTrack`.

    Accepts CRLF and LF endings, a leading BOM, and both ``,`` and ``.`` as
    millisecond separators. File indices are preserved. Overlapping entries
    are tolerated but the track is flagged ``overlapping_entries``.

    Raises :class:`MalformedTimecode` for an unparseable or inverted arrow
    line (with the offending block index attached) and
    :class:`NonMonotoneTrack` when start times decrease or indices fail to
    increase strictly.
    """
    text = raw.lstrip("﻿").replace("\r\n", "\n").replace("\r", "\n")
    blocks = [b for b in re.split(r"\n\s*\n", text) if b.strip()]

    entries: list[SubtitleEntry] = []
    for block_no, block in enumerate(blocks, 1):
        lines = [ln for ln in block.split("\n")]
        while lines and not lines[0].strip():
            lines.pop(0)
        if not lines:
            continue
        idx_line = lines[0].strip()
        if not idx_line.isdigit():
            raise MalformedTimecode(
                f"block {block_no}: expected numeric index, got {idx_line!r}",
                block_index=block_no,
            )
        if len(lines) < 2:
            raise MalformedTimecode(
                f"block {block_no}: missing timecode line", block_index=block_no
            )
        arrow = _ARROW_RE.split(lines[1].strip())
        if len(arrow) != 2:
            raise MalformedTimecode(
                f"block {block_no}: bad arrow line {lines[1]!r}", block_index=block_no
            )
        try:
            start_ms = parse_timecode(arrow[0])
            end_ms = parse_timecode(arrow[1])
        except MalformedTimecode as err:
            raise MalformedTimecode(
                f"block {block_no}: {err}", block_index=block_no
            ) from err
        if start_ms >= end_ms:
            raise MalformedTimecode(
                f"block {block_no}: start {format_timecode(start_ms)} >= "
                f"end {format_timecode(end_ms)}",
                block_index=block_no,
            )
        body = "\n".join(lines[2:]).strip("\n")
        if not body.strip():
            continue  # empty cue, common in the wild; drop it
        entries.append(
            SubtitleEntry(index=int(idx_line), start_ms=start_ms, end_ms=end_ms, text=body)
        )

    flags: tuple[str, ...] = ()
    for prev, cur in zip(entries, entries[1:]):
        if cur.start_ms < prev.start_ms:
            raise NonMonotoneTrack(
                f"entry {cur.index} starts at {format_timecode(cur.start_ms)}, "
                f"before entry {prev.index}"
            )
        if cur.index <= prev.index:
            raise NonMonotoneTrack(
                f"entry index {cur.index} does not increase after {prev.index}"
            )
        if cur.start_ms < prev.end_ms and "overlapping_entries" not in flags:
            flags = ("overlapping_entries",)

    return SubtitleTrack(entries=tuple(entries), source_tag=source_tag, flags=flags)


def serialize_srt(track: SubtitleTrack) -> str:
    """Render a track back to SRT text (``,`` separator, LF endings)."""
    blocks = []
    for entry in track.entries:
        blocks.append(
            f"{entry.index}\n"
            f"{format_timecode(entry.start_ms)} --> {format_timecode(entry.end_ms)}\n"
            f"{entry.text}\n"
        )
    return "\n".join(blocks)


@dataclass(frozen=True)
class NormalizationPolicy:
    """How text is folded before matching or word-level scoring.

    The output alphabet is limited to characters the policy keeps, so the
    transform is idempotent by construction.
    """

    lowercase: bool = True
    strip_punctuation: bool = True
    keep_apostrophes: bool = False
    collapse_whitespace: bool = True
    drop_digits: bool = False

    def as_dict(self) -> dict:
        return {
            "lowercase": self.lowercase,
            "strip_punctuation": self.strip_punctuation,
            "keep_apostrophes": self.keep_apostrophes,
            "collapse_whitespace": self.collapse_whitespace,
            "drop_digits": self.drop_digits,
        }


DEFAULT_POLICY = NormalizationPolicy()
APOSTROPHE_POLICY = NormalizationPolicy(keep_apostrophes=True)

_APOSTROPHES = {"'", "’"}


def normalize_text(s: str, policy: NormalizationPolicy = DEFAULT_POLICY) -> str:
    if policy.lowercase:
        s = s.lower()
    out = []
    for ch in s:
        if ch.isalpha():
            out.append(ch)
        elif ch.isdigit():
            out.append(" " if policy.drop_digits else ch)
        elif ch in _APOSTROPHES:
            out.append("'" if policy.keep_apostrophes else " ")
        elif policy.strip_punctuation and not ch.isspace():
            out.append(" ")
        else:
            out.append(ch)
    s = "".join(out)
    if policy.collapse_whitespace:
        s = " ".join(s.split())
    return s


def load_asr_jsonl(raw: str) -> list[AsrSegment]:
    """Read ASR segments from JSON Lines text.

    One object per line with fields ``start_ms``, ``end_ms``, ``text`` and
    optional ``confidence``.
    """
    segments: list[AsrSegment] = []
    for line_no, line in enumerate(raw.splitlines(), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as err:
            raise ValueError(f"asr line {line_no}: invalid JSON: {err}") from err
        try:
            segments.append(
                AsrSegment(
                    start_ms=int(obj["start_ms"]),
                    end_ms=int(obj["end_ms"]),
                    text=str(obj["text"]),
                    confidence=(
                        float(obj["confidence"]) if obj.get("confidence") is not None else None
                    ),
                )
            )
        except KeyError as err:
            raise ValueError(f"asr line {line_no}: missing field {err}") from err
    return segments


def dump_asr_jsonl(segments: list[AsrSegment]) -> str:
    lines = []
    for seg in segments:
        obj = {"start_ms": seg.start_ms, "end_ms": seg.end_ms, "text": seg.text}
        if seg.confidence is not None:
            obj["confidence"] = seg.confidence
        lines.append(json.dumps(obj, ensure_ascii=False))
    return "\n".join(lines) + ("\n" if lines else "")
