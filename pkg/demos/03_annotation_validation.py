"""Walkthrough: speaker attribution and expressiveness annotation.

Backends return structured JSON; everything is validated against the closed
vocabularies (8 relationship categories, 15 interaction modes) and rejected
whole when it does not parse. A scripted backend plays the remote model.
"""

import json

from dialogcut import SpeakerBank, SpeakerRef, validate_interaction_mode, validate_relationship
from dialogcut.annotation import (
    ScriptedBackend,
    build_attribution_request,
    build_expressiveness_request,
    parse_attribution_response,
    parse_expressiveness_response,
)
from dialogcut.errors import VocabViolation
from dialogcut.manifest import DialogueClip, Turn
from dialogcut.subtitles import SubtitleEntry, SubtitleTrack

bank = SpeakerBank(entries=(
    SpeakerRef(canonical_name="Marta", aliases=("Ms. Cabrera",)),
    SpeakerRef(canonical_name="Benoit", aliases=("Blanc",)),
))

lines = [
    "I keep thinking about the will reading.",
    "The donut hole inside the donut's hole.",
    "You always make it sound so simple.",
]
entries = tuple(
    SubtitleEntry(index=i + 1, start_ms=i * 3_000, end_ms=i * 3_000 + 2_500, text=t)
    for i, t in enumerate(lines)
)
track_slice = SubtitleTrack(entries=entries, source_tag="calibrated")
clip = DialogueClip(
    id="demo-clip",
    source_id="demo-movie",
    start_ms=0,
    end_ms=entries[-1].end_ms,
    turns=tuple(
        Turn(subtitle_index=i, speaker="", text=e.flat_text,
             start_ms=e.start_ms, end_ms=e.end_ms)
        for i, e in enumerate(entries)
    ),
)

# 1. attribution: the prompt pins the allowed names and numbered lines
request = build_attribution_request(clip, track_slice, bank)
print("--- attribution prompt ---")
print(request.prompt)

backend = ScriptedBackend.auto(bank)
annotations = parse_attribution_response(backend.complete(request), clip, bank)
for a in annotations:
    print(f"line {a.subtitle_index}: {a.speaker} (visible={a.visible})")

# aliases resolve; unknown names survive but are marked off-bank
reply = json.dumps({"lines": [
    {"index": 0, "speaker": "Blanc", "nonverbal": ["chuckle"], "visible": True},
    {"index": 1, "speaker": "Ms. Cabrera", "nonverbal": [], "visible": True},
    {"index": 2, "speaker": "the housekeeper", "nonverbal": [], "visible": False},
]})
for a in parse_attribution_response(reply, clip, bank):
    marker = " [off-bank]" if a.off_bank else ""
    print(f"line {a.subtitle_index}: {a.speaker}{marker} nonverbal={list(a.nonverbal)}")

# 2. expressiveness: labels must land in the closed vocabularies
from dataclasses import replace

attributed = replace(clip, turns=tuple(
    replace(t, speaker=a.speaker) for t, a in zip(clip.turns, annotations)
))
request = build_expressiveness_request(attributed, bank)
expr = parse_expressiveness_response(backend.complete(request), attributed)
print("\ntriplet:", expr.triplet)
print("intensity:", expr.intensity, "volatility:", expr.volatility)

# synonyms normalize, anything else fails closed
print("\n'Colleagues' ->", validate_relationship("Colleagues"))
print("'Enemy'      ->", validate_relationship("Enemy"))
print("'teasing'    ->", validate_interaction_mode("teasing"))
try:
    validate_relationship("Quantum")
except VocabViolation as err:
    print("'Quantum'    -> rejected:", err)
