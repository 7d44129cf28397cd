"""Walkthrough: the evaluation metric suite.

Overlap F1 compares two temporal segmentations; WER and cp-WER score
transcript accuracy (cp-WER after the best speaker mapping); sa-SIM scores
speaker timbre consistency from embeddings; judge scores aggregate with
population standard deviations.
"""

import json
import math

import numpy as np

from dialogcut import (
    DiarizedTranscript,
    SampleMetrics,
    SpeakerEmbeddingSet,
    aggregate_report,
    cp_wer,
    f1_overlap,
    label_recall,
    parse_judge_scores,
    sa_sim,
    wer,
)
from dialogcut.annotation import INTERACTION_MODES, RELATIONSHIPS

# --- segmentation overlap ---------------------------------------------------
coarse = [(0, 10_000)]
halves = [(0, 5_000), (5_000, 10_000)]
print("identical:", f1_overlap(coarse, coarse))
print("one side twice as dense:", round(f1_overlap(coarse, halves), 4),
      "(directional coverages 0.5 and 1.0)")

# --- word error rate ---------------------------------------------------------
print("\nWER 'the cat sat' vs 'the cat':", round(wer("the cat sat", "the cat"), 3))
print("WER is case/punctuation blind:", wer("Hello, WORLD!", "hello world"))

# --- speaker-permutation WER -------------------------------------------------
reference = DiarizedTranscript(utterances=(
    ("A", "we should go now"), ("B", "not before the rain stops"),
))
swapped = DiarizedTranscript(utterances=(
    ("B", "we should go now"), ("A", "not before the rain stops"),
))
print("\ncp-WER with swapped speaker labels:", cp_wer(reference, swapped),
      "(the mapping search absorbs relabeling)")

# --- speaker-aware similarity --------------------------------------------------
s = 1 / math.sqrt(2)
ref_emb = SpeakerEmbeddingSet(vectors={
    "A": np.array([[1.0, 0.0]]), "B": np.array([[0.0, 1.0]]),
})
hyp_emb = SpeakerEmbeddingSet(vectors={
    "A": np.array([[1.0, 0.0]]), "B": np.array([[s, s]]),
})
print("sa-SIM, one speaker drifted 45 degrees:", round(sa_sim(ref_emb, hyp_emb), 4))

# --- label recall ----------------------------------------------------------------
pairs = [("Friends", "Friends"), ("Family", "Friends"), ("Conflict", "Conflict")]
print("\nmacro recall over relationship golds:",
      round(label_recall(pairs[:2], RELATIONSHIPS), 3))

# --- judge scores and aggregation --------------------------------------------------
reply = json.dumps({
    "spontaneity": 4, "coherence": 5, "intelligibility": 5,
    "similarity": 4, "quality": 3, "instruction_following": 4,
})
scores = parse_judge_scores(reply)
samples = [
    SampleMetrics(sample_id="s1", wer=0.10, cp_wer=0.12, judge=scores),
    SampleMetrics(sample_id="s2", wer=0.30, cp_wer=0.40, judge=parse_judge_scores(
        reply.replace(": 3", ": 5")
    )),
]
report = aggregate_report(
    samples,
    relationship_vocabulary=RELATIONSHIPS,
    interaction_vocabulary=INTERACTION_MODES,
)
print("\naggregated report:")
print(json.dumps(report.as_dict(), indent=2))
