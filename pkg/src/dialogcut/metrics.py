"""Quantitative measures for segmentation and dialogue-generation quality:
overlap F1 between temporal segmentations, WER, speaker-permutation WER,
speaker-aware embedding similarity, macro label recall, judge-score parsing,
and report aggregation.

All functions here are pure; identical inputs give identical outputs.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .editdist import edit_distance
from .errors import (
    DimensionMismatch,
    EmptyInput,
    EmptyPartition,
    EmptyReference,
    SchemaViolation,
    ScoreOutOfRange,
    TooManySpeakers,
    UnknownGoldLabel,
)
from .subtitles import DEFAULT_POLICY, NormalizationPolicy, normalize_text

Interval = tuple[int, int]

MAX_SPEAKERS = 6


def validate_partition(intervals: Sequence[Interval], name: str = "partition") -> None:
    if not intervals:
        raise EmptyPartition(f"{name} is empty")
    for start, end in intervals:
        if start >= end:
            raise EmptyPartition(f"{name} has degenerate interval ({start}, {end})")
    for (s0, e0), (s1, e1) in zip(intervals, intervals[1:]):
        if s1 < e0:
            raise EmptyPartition(f"{name} intervals overlap at {s1}")


def _overlap(a: Interval, b: Interval) -> int:
    return max(0, min(a[1], b[1]) - max(a[0], b[0]))


def _directional_coverage(a: Sequence[Interval], b: Sequence[Interval]) -> float:
    """For each interval of ``a``, the single best-overlapping interval of
    ``b`` contributes; the sum is normalized by the total duration of ``a``."""
    covered = 0
    total = 0
    for ai in a:
        total += ai[1] - ai[0]
        covered += max((_overlap(ai, bj) for bj in b), default=0)
    return covered / total


def f1_overlap(a: Sequence[Interval], b: Sequence[Interval]) -> float:
    """Harmonic mean of the two directional max-overlap coverage ratios.

    Punishes both over- and under-segmentation: a segmentation that is too
    dense or too sparse can score high in one direction only. Disjoint
    segmentations (both directions zero) score 0 by convention.
    """
    validate_partition(a, "a")
    validate_partition(b, "b")
    p_ab = _directional_coverage(a, b)
    p_ba = _directional_coverage(b, a)
    if p_ab + p_ba == 0.0:
        return 0.0
    return 2.0 * p_ab * p_ba / (p_ab + p_ba)


def wer(
    reference: str,
    hypothesis: str,
    policy: NormalizationPolicy = DEFAULT_POLICY,
) -> float:
    """Word error rate: word-level edit distance over reference word count.

    Both sides are normalized first. Can exceed 1 when the hypothesis is
    much longer than the reference.
    """
    ref_words = normalize_text(reference, policy).split()
    hyp_words = normalize_text(hypothesis, policy).split()
    if not ref_words:
        raise EmptyReference("reference is empty after normalization")
    return edit_distance(ref_words, hyp_words) / len(ref_words)


@dataclass(frozen=True)
class DiarizedTranscript:
    """Ordered (speaker, text) utterances of one dialogue."""

    utterances: tuple[tuple[str, str], ...]

    def speakers(self) -> list[str]:
        seen: list[str] = []
        for speaker, _ in self.utterances:
            if speaker not in seen:
                seen.append(speaker)
        return seen

    def concatenated(self, policy: NormalizationPolicy) -> dict[str, list[str]]:
        out: dict[str, list[str]] = {}
        for speaker, text in self.utterances:
            out.setdefault(speaker, []).extend(normalize_text(text, policy).split())
        return out


def cp_wer(
    reference: DiarizedTranscript,
    hypothesis: DiarizedTranscript,
    policy: NormalizationPolicy = DEFAULT_POLICY,
    max_speakers: int = MAX_SPEAKERS,
) -> float:
    """Speaker-permutation WER over per-speaker concatenations.

    Utterances are concatenated per speaker in original order on both sides;
    the hypothesis speakers are assigned to reference speakers over all
    injective mappings (the smaller side padded with empty pseudo-speakers)
    and the minimum total edit distance, divided by the total reference word
    count, is returned. Relabeling hypothesis speakers can never change the
    score.
    """
    hyp_speakers = hypothesis.speakers()
    if len(hyp_speakers) > max_speakers:
        raise TooManySpeakers(
            f"{len(hyp_speakers)} hypothesis speakers exceed cap {max_speakers}"
        )
    ref_concat = reference.concatenated(policy)
    hyp_concat = hypothesis.concatenated(policy)
    total_ref_words = sum(len(words) for words in ref_concat.values())
    if total_ref_words == 0:
        raise EmptyReference("reference transcript empty after normalization")

    ref_lists = list(ref_concat.values())
    hyp_lists = list(hyp_concat.values())
    size = max(len(ref_lists), len(hyp_lists))
    ref_lists += [[]] * (size - len(ref_lists))
    hyp_lists += [[]] * (size - len(hyp_lists))

    dist = [
        [edit_distance(r, h) for h in hyp_lists]
        for r in ref_lists
    ]
    best = min(
        sum(dist[i][perm[i]] for i in range(size))
        for perm in itertools.permutations(range(size))
    )
    return best / total_ref_words


@dataclass(frozen=True)
class SpeakerEmbeddingSet:
    """Per-speaker stacks of unit-norm embedding vectors."""

    vectors: Mapping[str, np.ndarray]

    def __post_init__(self):
        dims = set()
        for speaker, arr in self.vectors.items():
            if arr.ndim != 2 or arr.shape[0] == 0:
                raise DimensionMismatch(f"{speaker}: expected (n, d) array")
            dims.add(arr.shape[1])
            norms = np.linalg.norm(arr, axis=1)
            if not np.allclose(norms, 1.0, atol=1e-6):
                raise DimensionMismatch(f"{speaker}: embeddings must be unit-norm")
        if len(dims) > 1:
            raise DimensionMismatch(f"mixed embedding dimensions {sorted(dims)}")

    def dim(self) -> int:
        return next(iter(self.vectors.values())).shape[1]

    def centroid(self, speaker: str) -> np.ndarray:
        mean = self.vectors[speaker].mean(axis=0)
        norm = np.linalg.norm(mean)
        if norm == 0.0:
            return mean
        return mean / norm


def sa_sim(
    reference: SpeakerEmbeddingSet,
    hypothesis: SpeakerEmbeddingSet,
    granularity: str = "centroid",
    max_speakers: int = MAX_SPEAKERS,
) -> float:
    """Best-mapping mean speaker similarity between two embedding sets.

    With the default ``centroid`` granularity each speaker is reduced to the
    normalized mean of their utterance embeddings and the mean cosine over
    mapped pairs is maximized over injective speaker mappings. The
    ``pairwise`` alternative averages all utterance-pair cosines per mapped
    speaker pair instead.
    """
    if granularity not in ("centroid", "pairwise"):
        raise ValueError(f"unknown granularity {granularity!r}")
    if reference.dim() != hypothesis.dim():
        raise DimensionMismatch(
            f"reference dim {reference.dim()} != hypothesis dim {hypothesis.dim()}"
        )
    ref_speakers = list(reference.vectors)
    hyp_speakers = list(hypothesis.vectors)
    if max(len(ref_speakers), len(hyp_speakers)) > max_speakers:
        raise TooManySpeakers(
            f"speaker count exceeds cap {max_speakers}"
        )

    def pair_score(r: str, h: str) -> float:
        if granularity == "centroid":
            return float(np.dot(reference.centroid(r), hypothesis.centroid(h)))
        sims = reference.vectors[r] @ hypothesis.vectors[h].T
        return float(sims.mean())

    if len(hyp_speakers) <= len(ref_speakers):
        small, large, flip = hyp_speakers, ref_speakers, True
    else:
        small, large, flip = ref_speakers, hyp_speakers, False

    best = -1.0
    for assigned in itertools.permutations(large, len(small)):
        pairs = zip(assigned, small) if flip else zip(small, assigned)
        score = sum(pair_score(r, h) for r, h in pairs) / len(small)
        best = max(best, score)
    return best


def label_recall(
    predictions: Sequence[tuple[str, str]],
    vocabulary: Sequence[str],
    average: str = "macro",
) -> float:
    """Mean per-class recall over classes with at least one gold instance.

    ``average="micro"`` switches to plain accuracy. Gold labels outside the
    vocabulary raise :class:`UnknownGoldLabel`.
    """
    if average not in ("macro", "micro"):
        raise ValueError(f"unknown average {average!r}")
    if not predictions:
        raise EmptyInput("no predictions")
    vocab = set(vocabulary)
    gold_counts: dict[str, int] = {}
    correct_counts: dict[str, int] = {}
    for gold, predicted in predictions:
        if gold not in vocab:
            raise UnknownGoldLabel(f"gold label {gold!r} not in vocabulary")
        gold_counts[gold] = gold_counts.get(gold, 0) + 1
        if predicted == gold:
            correct_counts[gold] = correct_counts.get(gold, 0) + 1
    if average == "micro":
        return sum(correct_counts.values()) / len(predictions)
    recalls = [
        correct_counts.get(label, 0) / count for label, count in gold_counts.items()
    ]
    return sum(recalls) / len(recalls)


JUDGE_FIELDS = (
    "spontaneity",
    "coherence",
    "intelligibility",
    "similarity",
    "quality",
    "instruction_following",
)


@dataclass(frozen=True)
class JudgeScores:
    spontaneity: float
    coherence: float
    intelligibility: float
    similarity: float
    quality: float
    instruction_following: float

    def as_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in JUDGE_FIELDS}


def parse_judge_scores(raw: str) -> JudgeScores:
    """Extract the six rubric scores from a strict structured reply.

    All six keys must be present and numeric in [1, 5]; unknown extra keys
    are ignored.
    """
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as err:
        raise SchemaViolation(f"judge reply is not valid JSON: {err}") from err
    if not isinstance(obj, dict):
        raise SchemaViolation("judge reply is not a JSON object")
    values = {}
    for name in JUDGE_FIELDS:
        if name not in obj:
            raise SchemaViolation(f"judge reply missing {name!r}")
        value = obj[name]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise SchemaViolation(f"judge score {name!r} is not numeric")
        if not 1.0 <= value <= 5.0:
            raise ScoreOutOfRange(f"judge score {name}={value} outside [1, 5]")
        values[name] = float(value)
    return JudgeScores(**values)


def _mean(xs: Sequence[float]) -> float:
    return sum(xs) / len(xs)


def _pstd(xs: Sequence[float]) -> float:
    mu = _mean(xs)
    return math.sqrt(sum((x - mu) ** 2 for x in xs) / len(xs))


@dataclass(frozen=True)
class SampleMetrics:
    """Per-sample metric bundle; optional fields stay None when a sample
    lacks the inputs (for instance no embeddings means no sa_sim)."""

    sample_id: str
    wer: float | None = None
    cp_wer: float | None = None
    sa_sim: float | None = None
    judge: JudgeScores | None = None
    ratings: Mapping[str, float] = field(default_factory=dict)
    gold_relationship: str | None = None
    predicted_relationship: str | None = None
    gold_interaction: str | None = None
    predicted_interaction: str | None = None
    external: Mapping[str, float] = field(default_factory=dict)

    def as_dict(self) -> dict:
        out: dict = {"sample_id": self.sample_id}
        for name in ("wer", "cp_wer", "sa_sim"):
            value = getattr(self, name)
            if value is not None:
                out[name] = value
        if self.judge is not None:
            out["judge"] = self.judge.as_dict()
        if self.ratings:
            out["ratings"] = dict(self.ratings)
        for name in ("gold_relationship", "predicted_relationship",
                     "gold_interaction", "predicted_interaction"):
            value = getattr(self, name)
            if value is not None:
                out[name] = value
        if self.external:
            out["external"] = dict(self.external)
        return out


@dataclass(frozen=True)
class EvalReport:
    """Aggregated system scorecard; judge and rating fields carry population
    standard deviations alongside the means."""

    wer: float | None
    cp_wer: float | None
    sa_sim: float | None
    label_recall_relationship: float | None
    label_recall_interaction: float | None
    judge_mean: dict[str, float]
    judge_std: dict[str, float]
    ratings_mean: dict[str, float]
    ratings_std: dict[str, float]
    external: dict[str, float]
    counts: dict[str, int]
    config_fingerprint: str = ""
    normalization: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "wer": self.wer,
            "cp_wer": self.cp_wer,
            "sa_sim": self.sa_sim,
            "label_recall_relationship": self.label_recall_relationship,
            "label_recall_interaction": self.label_recall_interaction,
            "judge_mean": self.judge_mean,
            "judge_std": self.judge_std,
            "ratings_mean": self.ratings_mean,
            "ratings_std": self.ratings_std,
            "external": self.external,
            "counts": self.counts,
            "config_fingerprint": self.config_fingerprint,
            "normalization": self.normalization,
        }

    def to_csv(self) -> str:
        flat: dict[str, object] = {}
        for key, value in self.as_dict().items():
            if isinstance(value, dict):
                for sub, v in value.items():
                    flat[f"{key}.{sub}"] = v
            else:
                flat[key] = value
        header = ",".join(flat)
        row = ",".join("" if v is None else str(v) for v in flat.values())
        return f"{header}\n{row}\n"


def aggregate_report(
    samples: Sequence[SampleMetrics],
    config_fingerprint: str = "",
    policy: NormalizationPolicy | None = None,
    relationship_vocabulary: Sequence[str] = (),
    interaction_vocabulary: Sequence[str] = (),
) -> EvalReport:
    """Fold per-sample bundles into one report.

    Scalar metrics are averaged over the samples that carry them; judge and
    rating fields get mean and population standard deviation; externally
    computed values (utmos, fvd, ...) are averaged only when present on all
    samples and omitted otherwise.
    """
    if not samples:
        raise EmptyInput("no samples to aggregate")

    counts: dict[str, int] = {"samples": len(samples)}

    def mean_of(name: str) -> float | None:
        values = [getattr(s, name) for s in samples if getattr(s, name) is not None]
        counts[name] = len(values)
        return _mean(values) if values else None

    wer_mean = mean_of("wer")
    cp_mean = mean_of("cp_wer")
    sa_mean = mean_of("sa_sim")

    judge_mean: dict[str, float] = {}
    judge_std: dict[str, float] = {}
    judged = [s.judge for s in samples if s.judge is not None]
    counts["judge"] = len(judged)
    if judged:
        for name in JUDGE_FIELDS:
            values = [getattr(j, name) for j in judged]
            judge_mean[name] = _mean(values)
            judge_std[name] = _pstd(values)

    ratings_mean: dict[str, float] = {}
    ratings_std: dict[str, float] = {}
    rating_keys = sorted({k for s in samples for k in s.ratings})
    for key in rating_keys:
        values = [s.ratings[key] for s in samples if key in s.ratings]
        counts[f"ratings.{key}"] = len(values)
        ratings_mean[key] = _mean(values)
        ratings_std[key] = _pstd(values)

    external: dict[str, float] = {}
    external_keys = sorted({k for s in samples for k in s.external})
    for key in external_keys:
        values = [s.external[key] for s in samples if key in s.external]
        if len(values) == len(samples):
            external[key] = _mean(values)

    rel_pairs = [
        (s.gold_relationship, s.predicted_relationship)
        for s in samples
        if s.gold_relationship is not None and s.predicted_relationship is not None
    ]
    inter_pairs = [
        (s.gold_interaction, s.predicted_interaction)
        for s in samples
        if s.gold_interaction is not None and s.predicted_interaction is not None
    ]
    counts["labels_relationship"] = len(rel_pairs)
    counts["labels_interaction"] = len(inter_pairs)
    rel_recall = (
        label_recall(rel_pairs, relationship_vocabulary) if rel_pairs else None
    )
    inter_recall = (
        label_recall(inter_pairs, interaction_vocabulary) if inter_pairs else None
    )

    return EvalReport(
        wer=wer_mean,
        cp_wer=cp_mean,
        sa_sim=sa_mean,
        label_recall_relationship=rel_recall,
        label_recall_interaction=inter_recall,
        judge_mean=judge_mean,
        judge_std=judge_std,
        ratings_mean=ratings_mean,
        ratings_std=ratings_std,
        external=external,
        counts=counts,
        config_fingerprint=config_fingerprint,
        normalization=policy.as_dict() if policy is not None else {},
    )
