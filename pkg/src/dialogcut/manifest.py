"""Append-only JSON Lines manifest of dialogue clips, corpus statistics,
benchmark selection, and deterministic split construction.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from .annotation import AffectiveTriplet, ExpressivenessAnnotation
from .boundaries import SceneRange
from .errors import EmptyManifest, RatioSumInvalid, UnknownHardId
from .subtitles import SubtitleTrack

SPLITS = ("train", "valid", "test", "hard", "bench")

MS_PER_HOUR = 3_600_000.0


@dataclass(frozen=True)
class Turn:
    """One attributed subtitle line inside a clip."""

    subtitle_index: int
    speaker: str
    text: str
    start_ms: int
    end_ms: int
    nonverbal: tuple[str, ...] = ()
    visible: bool = False


@dataclass(frozen=True)
class DialogueClip:
    """A curated dialogue segment with its annotations and markers.

    ``media_refs`` is runtime-only wiring for annotation backends and is
    never serialized. Construction is permissive so clips can be assembled
    stage by stage; call :meth:`validate` before persisting.
    """

    id: str
    source_id: str
    start_ms: int
    end_ms: int
    turns: tuple[Turn, ...] = ()
    expressiveness: ExpressivenessAnnotation | None = None
    flags: tuple[str, ...] = ()
    split: str | None = None
    pipeline_versions: dict[str, str] = field(default_factory=dict)
    media_refs: tuple[str, ...] = ()

    def turn_indices(self) -> list[int]:
        return [turn.subtitle_index for turn in self.turns]

    def speakers(self) -> list[str]:
        seen: list[str] = []
        for turn in self.turns:
            if turn.speaker not in seen:
                seen.append(turn.speaker)
        return seen

    def duration_ms(self) -> int:
        return self.end_ms - self.start_ms

    def speaker_changes(self) -> int:
        return sum(
            1 for a, b in zip(self.turns, self.turns[1:]) if a.speaker != b.speaker
        )

    def with_flag(self, flag: str) -> "DialogueClip":
        if flag in self.flags:
            return self
        return replace(self, flags=self.flags + (flag,))

    def validate(self) -> None:
        if not self.turns:
            raise ValueError(f"clip {self.id}: no turns")
        if self.start_ms >= self.end_ms:
            raise ValueError(f"clip {self.id}: start >= end")
        for turn in self.turns:
            if not turn.speaker:
                raise ValueError(f"clip {self.id}: turn {turn.subtitle_index} has no speaker")
            if turn.start_ms < self.start_ms or turn.end_ms > self.end_ms:
                raise ValueError(
                    f"clip {self.id}: turn {turn.subtitle_index} outside clip range"
                )
        for a, b in zip(self.turns, self.turns[1:]):
            if b.start_ms < a.start_ms:
                raise ValueError(f"clip {self.id}: turns out of order")
        if self.split is not None and self.split not in SPLITS:
            raise ValueError(f"clip {self.id}: unknown split {self.split!r}")
        if self.expressiveness is not None:
            desc = set(self.expressiveness.descriptions)
            if desc != set(self.speakers()):
                raise ValueError(
                    f"clip {self.id}: description speakers {sorted(desc)} != "
                    f"turn speakers {sorted(set(self.speakers()))}"
                )


def draft_clip_from_range(
    source_id: str,
    rng: SceneRange,
    track: SubtitleTrack,
    media_refs: Sequence[str] = (),
    pipeline_versions: dict[str, str] | None = None,
) -> DialogueClip:
    """Build an unattributed clip for a scene range; speakers are filled in
    by the annotation stage."""
    entries = track.entries[rng.first:rng.last + 1]
    turns = tuple(
        Turn(
            subtitle_index=rng.first + k,
            speaker="",
            text=entry.flat_text,
            start_ms=entry.start_ms,
            end_ms=entry.end_ms,
        )
        for k, entry in enumerate(entries)
    )
    return DialogueClip(
        id=f"{source_id}-{rng.first:05d}-{rng.last:05d}",
        source_id=source_id,
        start_ms=entries[0].start_ms,
        end_ms=entries[-1].end_ms,
        turns=turns,
        flags=tuple(rng.flags),
        pipeline_versions=dict(pipeline_versions or {}),
        media_refs=tuple(media_refs),
    )


# --- serialization ---

def clip_to_json(clip: DialogueClip) -> str:
    """Canonical one-line JSON for a clip: fixed key order, sorted flags,
    compact separators. Write-then-read reproduces clips bit-exactly."""
    obj: dict = {
        "id": clip.id,
        "source_id": clip.source_id,
        "start_ms": clip.start_ms,
        "end_ms": clip.end_ms,
        "turns": [
            {
                "subtitle_index": t.subtitle_index,
                "speaker": t.speaker,
                "text": t.text,
                "start_ms": t.start_ms,
                "end_ms": t.end_ms,
                "nonverbal": list(t.nonverbal),
                "visible": t.visible,
            }
            for t in clip.turns
        ],
    }
    if clip.expressiveness is not None:
        expr = clip.expressiveness
        obj["triplet"] = {
            "relationship": expr.triplet.relationship,
            "interaction_mode": expr.triplet.interaction_mode,
            "emotional_tone": expr.triplet.emotional_tone,
        }
        obj["descriptions"] = {k: expr.descriptions[k] for k in sorted(expr.descriptions)}
        obj["intensity"] = expr.intensity
        obj["volatility"] = expr.volatility
    obj["flags"] = sorted(clip.flags)
    if clip.split is not None:
        obj["split"] = clip.split
    obj["pipeline_versions"] = {
        k: clip.pipeline_versions[k] for k in sorted(clip.pipeline_versions)
    }
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def clip_from_json(line: str) -> DialogueClip:
    obj = json.loads(line)
    turns = tuple(
        Turn(
            subtitle_index=t["subtitle_index"],
            speaker=t["speaker"],
            text=t["text"],
            start_ms=t["start_ms"],
            end_ms=t["end_ms"],
            nonverbal=tuple(t.get("nonverbal", [])),
            visible=t.get("visible", False),
        )
        for t in obj["turns"]
    )
    expressiveness = None
    if "triplet" in obj:
        trip = obj["triplet"]
        expressiveness = ExpressivenessAnnotation(
            triplet=AffectiveTriplet(
                relationship=trip["relationship"],
                interaction_mode=trip["interaction_mode"],
                emotional_tone=trip["emotional_tone"],
            ),
            descriptions=dict(obj.get("descriptions", {})),
            intensity=obj["intensity"],
            volatility=obj["volatility"],
        )
    return DialogueClip(
        id=obj["id"],
        source_id=obj["source_id"],
        start_ms=obj["start_ms"],
        end_ms=obj["end_ms"],
        turns=turns,
        expressiveness=expressiveness,
        flags=tuple(obj.get("flags", [])),
        split=obj.get("split"),
        pipeline_versions=dict(obj.get("pipeline_versions", {})),
    )


def append_clips(path: str | Path, clips: Iterable[DialogueClip]) -> int:
    """Append clips to the manifest; returns how many rows were written."""
    count = 0
    with open(path, "a", encoding="utf-8") as fh:
        for clip in clips:
            clip.validate()
            fh.write(clip_to_json(clip) + "\n")
            count += 1
    return count


def iter_manifest(path: str | Path) -> Iterator[DialogueClip]:
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                yield clip_from_json(line)


def load_manifest(path: str | Path) -> list[DialogueClip]:
    """Load clips, last occurrence of an id winning (append-only updates)."""
    by_id: dict[str, DialogueClip] = {}
    for clip in iter_manifest(path):
        by_id[clip.id] = clip
    return list(by_id.values())


def compact_manifest(path: str | Path) -> int:
    """Rewrite the manifest keeping only the latest row per id."""
    clips = load_manifest(path)
    tmp = Path(str(path) + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        for clip in clips:
            fh.write(clip_to_json(clip) + "\n")
    tmp.replace(path)
    return len(clips)


# --- statistics ---

@dataclass(frozen=True)
class CorpusStats:
    total_dialogues: int
    total_turns: int
    total_duration_hours: float
    avg_speakers_per_dialogue: float
    avg_duration_per_dialogue_s: float
    avg_turns_per_dialogue: float
    avg_duration_per_turn_s: float
    avg_turns_per_speaker_per_dialogue: float
    avg_speaker_change_rounds_per_dialogue: float
    mean_intensity: float | None
    mean_volatility: float | None

    def as_dict(self) -> dict:
        return {
            "total_dialogues": self.total_dialogues,
            "total_turns": self.total_turns,
            "total_duration_hours": self.total_duration_hours,
            "avg_speakers_per_dialogue": self.avg_speakers_per_dialogue,
            "avg_duration_per_dialogue_s": self.avg_duration_per_dialogue_s,
            "avg_turns_per_dialogue": self.avg_turns_per_dialogue,
            "avg_duration_per_turn_s": self.avg_duration_per_turn_s,
            "avg_turns_per_speaker_per_dialogue": self.avg_turns_per_speaker_per_dialogue,
            "avg_speaker_change_rounds_per_dialogue": self.avg_speaker_change_rounds_per_dialogue,
            "mean_intensity": self.mean_intensity,
            "mean_volatility": self.mean_volatility,
        }


def compute_stats(clips: Sequence[DialogueClip]) -> CorpusStats:
    """Corpus-level statistics; every average reconstructs from the totals.

    Speaker-change rounds count adjacent turn pairs with differing speakers
    within each dialogue.
    """
    if not clips:
        raise EmptyManifest("no clips")
    n = len(clips)
    total_turns = sum(len(c.turns) for c in clips)
    total_duration_ms = sum(c.duration_ms() for c in clips)
    total_speakers = sum(len(c.speakers()) for c in clips)
    total_changes = sum(c.speaker_changes() for c in clips)
    avg_speakers = total_speakers / n
    avg_turns = total_turns / n
    scored = [c.expressiveness for c in clips if c.expressiveness is not None]
    return CorpusStats(
        total_dialogues=n,
        total_turns=total_turns,
        total_duration_hours=total_duration_ms / MS_PER_HOUR,
        avg_speakers_per_dialogue=avg_speakers,
        avg_duration_per_dialogue_s=total_duration_ms / 1000.0 / n,
        avg_turns_per_dialogue=avg_turns,
        avg_duration_per_turn_s=total_duration_ms / 1000.0 / total_turns,
        avg_turns_per_speaker_per_dialogue=avg_turns / avg_speakers,
        avg_speaker_change_rounds_per_dialogue=total_changes / n,
        mean_intensity=(
            sum(e.intensity for e in scored) / len(scored) if scored else None
        ),
        mean_volatility=(
            sum(e.volatility for e in scored) / len(scored) if scored else None
        ),
    )


# --- benchmark selection ---

@dataclass(frozen=True)
class BenchCriteria:
    required_speaker_count: int = 2
    require_all_turns_visible: bool = True
    min_intensity: int = 7
    min_volatility: int = 7


def select_bench(
    clips: Sequence[DialogueClip], criteria: BenchCriteria = BenchCriteria()
) -> list[DialogueClip]:
    """Pick the highly expressive, fully visible, exact-speaker-count clips.

    Clips without expressiveness never qualify. Selected clips come back
    with ``split="bench"``, ordered by id. Tightening any threshold can only
    shrink the selection.
    """
    selected = []
    for clip in clips:
        expr = clip.expressiveness
        if expr is None:
            continue
        if len(clip.speakers()) != criteria.required_speaker_count:
            continue
        if criteria.require_all_turns_visible and not all(t.visible for t in clip.turns):
            continue
        if expr.intensity < criteria.min_intensity:
            continue
        if expr.volatility < criteria.min_volatility:
            continue
        selected.append(replace(clip, split="bench"))
    selected.sort(key=lambda c: c.id)
    return selected


def flag_missing_expressiveness(clips: Sequence[DialogueClip]) -> list[DialogueClip]:
    """Mark clips that cannot be bench candidates for lack of annotation."""
    return [
        c.with_flag("missing_expressiveness") if c.expressiveness is None else c
        for c in clips
    ]


def propose_hard_ids(clips: Sequence[DialogueClip], count: int) -> list[str]:
    """Rank candidates for the hard split by intensity + volatility."""
    scored = [
        (c.expressiveness.intensity + c.expressiveness.volatility, c.id)
        for c in clips
        if c.expressiveness is not None
    ]
    scored.sort(key=lambda pair: (-pair[0], pair[1]))
    return [cid for _, cid in scored[:count]]


# --- splits ---

def largest_remainder_sizes(total: int, ratios: Sequence[float]) -> list[int]:
    """Integer split sizes that sum exactly to ``total``."""
    exact = [total * r for r in ratios]
    sizes = [int(x) for x in exact]
    leftovers = total - sum(sizes)
    order = sorted(range(len(ratios)), key=lambda i: (-(exact[i] - sizes[i]), i))
    for i in order[:leftovers]:
        sizes[i] += 1
    return sizes


def split_corpus(
    clips: Sequence[DialogueClip],
    ratios: tuple[float, float, float] = (0.9, 0.05, 0.05),
    seed: int = 0,
    hard_ids: frozenset[str] | set[str] = frozenset(),
) -> list[DialogueClip]:
    """Assign train/valid/test splits with a seeded shuffle.

    Clips named in ``hard_ids`` become the hard split (clips already marked
    bench keep that label, bench being a subset of hard) and are excluded
    from the random split. The rest is partitioned at the given ratios with
    largest-remainder rounding; identical (manifest, seed) inputs reproduce
    identical assignments.
    """
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise RatioSumInvalid(f"ratios {ratios} sum to {sum(ratios)}")
    known = {c.id for c in clips}
    unknown = set(hard_ids) - known
    if unknown:
        raise UnknownHardId(f"hard ids not in manifest: {sorted(unknown)}")

    out: dict[str, DialogueClip] = {}
    pool: list[DialogueClip] = []
    for clip in clips:
        if clip.id in hard_ids:
            out[clip.id] = clip if clip.split == "bench" else replace(clip, split="hard")
        else:
            pool.append(clip)

    pool.sort(key=lambda c: c.id)
    rng = random.Random(seed)
    rng.shuffle(pool)
    sizes = largest_remainder_sizes(len(pool), ratios)
    cursor = 0
    for name, size in zip(("train", "valid", "test"), sizes):
        for clip in pool[cursor:cursor + size]:
            out[clip.id] = replace(clip, split=name)
        cursor += size

    return [out[c.id] for c in clips]
