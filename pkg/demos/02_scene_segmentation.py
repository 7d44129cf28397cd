"""Walkthrough: tolerance-enhanced scene segmentation.

The detector checks continuity only every b-th keyframe against a small
rolling pool, so a single flashback frame between two checkpoints never
splits the scene, while a real scene change is pinned exactly by binary
search. A scripted oracle (keyed by ground-truth scene IDs) stands in for
the vision backend.
"""

from dialogcut import ScriptedOracle, detect_scene_ranges
from dialogcut.boundaries import boundaries_from_scene_ids
from dialogcut.keyframes import KeyframeRef


def frames(ids):
    return [KeyframeRef(subtitle_index=i, timestamp_ms=i * 4_000) for i in range(len(ids))]


flat_sim = lambda a, b: 0.0  # pool eviction is irrelevant with a scripted oracle

# two clean scenes
ids = ["kitchen"] * 5 + ["rooftop"] * 5
oracle = ScriptedOracle(ids)
ranges = detect_scene_ranges(frames(ids), oracle, flat_sim, b=2, m=3)
print("two scenes:", [(r.first, r.last) for r in ranges], f"({oracle.calls} oracle calls)")

# a one-frame flashback inside the kitchen scene
ids = ["kitchen", "kitchen", "kitchen", "war-memory", "kitchen", "kitchen"]
oracle = ScriptedOracle(ids)
ranges = detect_scene_ranges(frames(ids), oracle, flat_sim, b=2, m=3)
print("flashback bridged:", [(r.first, r.last) for r in ranges],
      "<- the intruding frame never became a boundary")

# frame-by-frame checking (b=1) would have probed the flashback directly
oracle = ScriptedOracle(ids)
ranges = detect_scene_ranges(frames(ids), oracle, flat_sim, b=1, m=3)
print("same input at b=1: ", [(r.first, r.last) for r in ranges],
      "<- no buffer, the disruption splits the scene")

# budget: a 30-frame single scene costs ceil(29/3) checks at b=3
ids = ["ballroom"] * 30
oracle = ScriptedOracle(ids)
detect_scene_ranges(frames(ids), oracle, flat_sim, b=3, m=5)
print(f"\n30 same-scene frames at b=3: {oracle.calls} oracle calls")

# ground truth helper used throughout the tests
ids = ["a"] * 3 + ["b"] * 4 + ["c"] * 2
print("truth for", ids, "->",
      [(r.first, r.last) for r in boundaries_from_scene_ids(ids)])
