"""Walkthrough: the clip manifest, corpus statistics, benchmark selection,
and deterministic splits.
"""

import json
import tempfile
from pathlib import Path

from dialogcut import BenchCriteria, DialogueClip, Turn, compute_stats, select_bench, split_corpus
from dialogcut.annotation import AffectiveTriplet, ExpressivenessAnnotation
from dialogcut.manifest import append_clips, load_manifest, propose_hard_ids


def clip(cid, speakers, intensity, volatility, visible=True):
    turns = tuple(
        Turn(subtitle_index=i, speaker=s, text=f"line {i}",
             start_ms=i * 3_000, end_ms=(i + 1) * 3_000, visible=visible)
        for i, s in enumerate(speakers)
    )
    return DialogueClip(
        id=cid, source_id="demo", start_ms=0, end_ms=turns[-1].end_ms, turns=turns,
        expressiveness=ExpressivenessAnnotation(
            triplet=AffectiveTriplet("Friends", "Banter", "wry"),
            descriptions={s: f"{s} stays playful" for s in dict.fromkeys(speakers)},
            intensity=intensity, volatility=volatility,
        ),
    )


clips = [
    clip("c001", ["Ann", "Ben", "Ann", "Ben"], intensity=9, volatility=8),
    clip("c002", ["Ann", "Ben"], intensity=4, volatility=3),
    clip("c003", ["Ann", "Ben", "Cat"], intensity=9, volatility=9),
    clip("c004", ["Ann", "Ben", "Ann"], intensity=8, volatility=7, visible=False),
] + [clip(f"c{i:03d}", ["Ann", "Ben"], 5, 5) for i in range(5, 25)]

stats = compute_stats(clips)
print("corpus statistics:")
print(json.dumps(stats.as_dict(), indent=2))

# benchmark: exactly two speakers, every turn visible, highly expressive
bench = select_bench(clips, BenchCriteria(min_intensity=7, min_volatility=7))
print("\nbench picks:", [c.id for c in bench])
print("  c002 too flat, c003 has three speakers, c004 has a hidden turn")

# hard-set candidates ranked by expressiveness, then a seeded split
hard = set(propose_hard_ids(clips, 3))
print("\nproposed hard ids:", sorted(hard))
assigned = split_corpus(clips, ratios=(0.9, 0.05, 0.05), seed=13, hard_ids=hard)
counts: dict[str, int] = {}
for c in assigned:
    counts[c.split] = counts.get(c.split, 0) + 1
print("split sizes:", dict(sorted(counts.items())))

# manifest rows are canonical JSON Lines; write-read-write is byte-stable
with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "manifest.jsonl"
    append_clips(path, assigned)
    first = path.read_bytes()
    reloaded = load_manifest(path)
    path.unlink()
    append_clips(path, reloaded)
    print("\nmanifest round-trip byte-stable:", path.read_bytes() == first)
    print("one row looks like:")
    print(first.decode().splitlines()[0][:160] + " ...")
