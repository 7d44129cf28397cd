from __future__ import annotations

import pytest

from dialogcut.subtitles import AsrSegment, SubtitleEntry, SubtitleTrack

LINES = [
    "the quick brown fox jumps over the lazy dog",
    "pack my box with five dozen liquor jugs",
    "how vexingly quick daft zebras jump around",
    "the five boxing wizards jump quickly tonight",
    "sphinx of black quartz judge my vow again",
    "bright vixens jump while dozy fowl quack loudly",
    "my girl wove six dozen plaid jackets today",
    "we promptly judged antique ivory buckles for prizes",
    "crazy fredrick bought many very exquisite opal jewels",
    "jackdaws love my big sphinx of quartz forever",
]


def line(i: int) -> str:
    return LINES[i % len(LINES)] + ("" if i < len(LINES) else f" take {i}")


def make_track(
    n: int = 6,
    start_ms: int = 0,
    gap_ms: int = 4_000,
    duration_ms: int = 2_500,
    source_tag: str = "test",
) -> SubtitleTrack:
    entries = tuple(
        SubtitleEntry(
            index=i + 1,
            start_ms=start_ms + i * gap_ms,
            end_ms=start_ms + i * gap_ms + duration_ms,
            text=line(i),
        )
        for i in range(n)
    )
    return SubtitleTrack(entries=entries, source_tag=source_tag)


def make_asr(track: SubtitleTrack) -> list[AsrSegment]:
    return [
        AsrSegment(start_ms=e.start_ms, end_ms=e.end_ms, text=e.flat_text)
        for e in track.entries
    ]


def shift_track(track: SubtitleTrack, offset_ms: int) -> SubtitleTrack:
    from dataclasses import replace

    entries = tuple(
        replace(e, start_ms=e.start_ms + offset_ms, end_ms=e.end_ms + offset_ms)
        for e in track.entries
    )
    return replace(track, entries=entries)


def scale_track(track: SubtitleTrack, slope: float, offset_ms: int = 0) -> SubtitleTrack:
    from dataclasses import replace

    entries = tuple(
        replace(
            e,
            start_ms=round(e.start_ms * slope) + offset_ms,
            end_ms=round(e.end_ms * slope) + offset_ms,
        )
        for e in track.entries
    )
    return replace(track, entries=entries)


@pytest.fixture
def six_track() -> SubtitleTrack:
    return make_track(6)
