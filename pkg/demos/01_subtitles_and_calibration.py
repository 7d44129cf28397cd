"""Walkthrough: parsing subtitles and aligning them to ASR time.

A downloaded subtitle file usually lags or leads the actual audio. Here we
fabricate that situation: take a clean transcript, shift it by 2.5 seconds,
then recover the shift from text anchors alone.
"""

from dialogcut import (
    AnchorConfig,
    AsrSegment,
    apply_calibration,
    classify_alignment,
    extend_entry_ends,
    fit_translation,
    match_anchors,
    parse_srt,
    serialize_srt,
)

RAW_SRT = """\
1
00:00:02,500 --> 00:00:05,000
I told you the bridge was out.

2
00:00:06,500 --> 00:00:09,000
And I told you we were not taking the bridge.

3
00:00:10,500 --> 00:00:13,000
Then why are we standing in the river?
"""

# the same lines as the speech recognizer heard them, at the true times
ASR = [
    AsrSegment(start_ms=0, end_ms=2_500, text="I told you the bridge was out"),
    AsrSegment(start_ms=4_000, end_ms=6_500, text="and I told you we were not taking the bridge"),
    AsrSegment(start_ms=8_000, end_ms=10_500, text="then why are we standing in the river"),
]

track = parse_srt(RAW_SRT, source_tag="uncalibrated")
print(f"parsed {len(track)} entries, first starts at {track.entries[0].start_ms} ms")

anchors = match_anchors(ASR, track, AnchorConfig())
print(f"\nanchors matched: {len(anchors)}")
for a in anchors:
    print(f"  asr[{a.asr_index}] <-> srt[{a.srt_index}]  "
          f"score={a.text_score:.2f}  start gap={a.start_discrepancy_ms:+d} ms")

model = fit_translation(anchors)
print(f"\nfitted: offset={model.offset_ms:+.1f} ms, slope={model.slope:.4f}, "
      f"residual std={model.residual_std_ms:.1f} ms")

verdict = classify_alignment(anchors, model)
print(f"verdict: {verdict.verdict.value}")

calibrated = apply_calibration(track, model)
print("\ncalibrated starts:", [e.start_ms for e in calibrated.entries])

# speech often trails the written cue; give each entry some slack
extended = extend_entry_ends(calibrated, cap_ms=1_000)
print("extended ends:   ", [e.end_ms for e in extended.entries])

print("\nround trip back to SRT:\n")
print(serialize_srt(extended))
