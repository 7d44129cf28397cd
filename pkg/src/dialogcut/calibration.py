"""Align uncalibrated subtitle tracks to ASR time.

High-confidence text matches between ASR segments and subtitle entries
become anchor points; a linear model ``srt_start = slope * asr_start +
offset`` is fitted over them, the residual profile decides whether the track
is usable, has edited-out segments, or a speed change, and usable tracks are
mapped back onto the ASR timeline.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass, replace
from enum import Enum

from .editdist import edit_similarity
from .errors import InsufficientAnchors, NoAnchorsFound
from .subtitles import (
    DEFAULT_POLICY,
    AsrSegment,
    NormalizationPolicy,
    SubtitleEntry,
    SubtitleTrack,
    normalize_text,
)


@dataclass(frozen=True)
class AnchorPair:
    """A matched (ASR segment, subtitle entry) pair and its time deltas.

    ``start_discrepancy_ms`` is subtitle start minus ASR start, so a subtitle
    track lagging the audio by 2 s yields +2000 on every anchor.
    """

    asr_index: int
    srt_index: int
    text_score: float
    start_discrepancy_ms: int
    duration_discrepancy_ms: int
    asr_start_ms: int
    srt_start_ms: int


@dataclass(frozen=True)
class AnchorConfig:
    tau: float = 0.85
    min_text_chars: int = 10  # short lines like "Yeah." match spuriously
    monotone: bool = True
    policy: NormalizationPolicy = DEFAULT_POLICY


@dataclass(frozen=True)
class CalibrationModel:
    """Fitted time map: subtitle time = slope * media time + offset."""

    offset_ms: float
    slope: float
    residual_std_ms: float
    anchor_count: int


class Verdict(Enum):
    USABLE = "usable"
    EDITED_SEGMENTS = "edited_segments"
    EDITED_SPEED = "edited_speed"
    REJECTED = "rejected"


@dataclass(frozen=True)
class VerdictThresholds:
    slope_tol: float = 0.01
    jump_tol_ms: float = 5_000.0
    std_tol_ms: float = 500.0
    jump_window: int = 3


@dataclass(frozen=True)
class AlignmentVerdict:
    verdict: Verdict
    residual_std_ms: float
    max_jump_ms: float
    slope: float


def match_anchors(
    asr: list[AsrSegment],
    srt: SubtitleTrack,
    cfg: AnchorConfig = AnchorConfig(),
) -> list[AnchorPair]:
    """Match ASR segments against subtitle entries as anchor points.

    Candidate pairs are those whose normalized texts reach character-level
    edit similarity >= ``cfg.tau`` and are at least ``cfg.min_text_chars``
    long on both sides. With ``cfg.monotone`` (the default) the returned
    anchors form the strictly increasing chain, in both indices, that
    maximizes total text score; conflicts between equally plausible matches
    resolve in favor of the higher-scoring chain.

    Raises :class:`NoAnchorsFound` when no pair reaches the threshold.
    """
    if not asr or not srt.entries:
        raise NoAnchorsFound("empty ASR or subtitle input")

    norm_asr = [normalize_text(seg.text, cfg.policy) for seg in asr]
    norm_srt = [normalize_text(e.flat_text, cfg.policy) for e in srt.entries]

    candidates: list[AnchorPair] = []
    for i, (seg, a_text) in enumerate(zip(asr, norm_asr)):
        if len(a_text) < cfg.min_text_chars:
            continue
        for j, (entry, s_text) in enumerate(zip(srt.entries, norm_srt)):
            if len(s_text) < cfg.min_text_chars:
                continue
            longest = max(len(a_text), len(s_text))
            # length gap alone already bounds similarity below tau
            if 1.0 - abs(len(a_text) - len(s_text)) / longest < cfg.tau:
                continue
            score = edit_similarity(a_text, s_text)
            if score >= cfg.tau:
                candidates.append(
                    AnchorPair(
                        asr_index=i,
                        srt_index=j,
                        text_score=score,
                        start_discrepancy_ms=entry.start_ms - seg.start_ms,
                        duration_discrepancy_ms=entry.duration_ms - seg.duration_ms,
                        asr_start_ms=seg.start_ms,
                        srt_start_ms=entry.start_ms,
                    )
                )

    if not candidates:
        raise NoAnchorsFound(f"no text pair reaches similarity {cfg.tau}")
    if not cfg.monotone:
        return sorted(candidates, key=lambda p: (p.asr_index, p.srt_index))

    # max-total-score chain, strictly increasing in both indices
    candidates.sort(key=lambda p: (p.asr_index, p.srt_index))
    best = [p.text_score for p in candidates]
    prev = [-1] * len(candidates)
    for k, pk in enumerate(candidates):
        for l in range(k):
            pl = candidates[l]
            if pl.asr_index < pk.asr_index and pl.srt_index < pk.srt_index:
                if best[l] + pk.text_score > best[k]:
                    best[k] = best[l] + pk.text_score
                    prev[k] = l
    end = max(range(len(candidates)), key=lambda k: best[k])
    chain = []
    while end != -1:
        chain.append(candidates[end])
        end = prev[end]
    chain.reverse()
    return chain


def fit_translation(anchors: list[AnchorPair]) -> CalibrationModel:
    """Least-squares fit of subtitle starts against ASR starts.

    With a single anchor the slope is pinned at 1.0 and the offset is that
    anchor's start discrepancy. ``residual_std_ms`` is the population
    standard deviation of the fit residuals.

    Raises :class:`InsufficientAnchors` on an empty list.
    """
    if not anchors:
        raise InsufficientAnchors("no anchors to fit")
    if len(anchors) == 1:
        return CalibrationModel(
            offset_ms=float(anchors[0].start_discrepancy_ms),
            slope=1.0,
            residual_std_ms=0.0,
            anchor_count=1,
        )

    xs = [float(p.asr_start_ms) for p in anchors]
    ys = [float(p.srt_start_ms) for p in anchors]
    n = len(xs)
    mean_x = sum(xs) / n
    mean_y = sum(ys) / n
    var_x = sum((x - mean_x) ** 2 for x in xs) / n
    if var_x == 0.0:
        slope = 1.0
        offset = mean_y - mean_x
    else:
        cov = sum((x - mean_x) * (y - mean_y) for x, y in zip(xs, ys)) / n
        slope = cov / var_x
        offset = mean_y - slope * mean_x

    residuals = [y - (slope * x + offset) for x, y in zip(xs, ys)]
    residual_std = math.sqrt(sum(r * r for r in residuals) / n)
    return CalibrationModel(
        offset_ms=offset, slope=slope, residual_std_ms=residual_std, anchor_count=n
    )


def fit_residuals(anchors: list[AnchorPair], model: CalibrationModel) -> list[float]:
    return [
        p.srt_start_ms - (model.slope * p.asr_start_ms + model.offset_ms)
        for p in anchors
    ]


def classify_alignment(
    anchors: list[AnchorPair],
    model: CalibrationModel,
    thr: VerdictThresholds = VerdictThresholds(),
) -> AlignmentVerdict:
    """Decide what the residual profile says about the track.

    Precedence is fixed: a slope deviation beyond ``slope_tol`` means the
    media speed was edited; otherwise a step change in the residual sequence
    larger than ``jump_tol_ms`` (max difference between the means of the
    windows on either side of each split point) means segments were cut or
    inserted; otherwise residual spread within ``std_tol_ms`` is usable, and
    anything else is rejected.
    """
    residuals = fit_residuals(anchors, model)
    max_jump = 0.0
    w = max(1, thr.jump_window)
    for k in range(1, len(residuals)):
        left = residuals[max(0, k - w):k]
        right = residuals[k:k + w]
        jump = abs(statistics.fmean(right) - statistics.fmean(left))
        max_jump = max(max_jump, jump)

    if abs(model.slope - 1.0) > thr.slope_tol:
        verdict = Verdict.EDITED_SPEED
    elif max_jump > thr.jump_tol_ms:
        verdict = Verdict.EDITED_SEGMENTS
    elif model.residual_std_ms <= thr.std_tol_ms:
        verdict = Verdict.USABLE
    else:
        verdict = Verdict.REJECTED
    return AlignmentVerdict(
        verdict=verdict,
        residual_std_ms=model.residual_std_ms,
        max_jump_ms=max_jump,
        slope=model.slope,
    )


def apply_calibration(track: SubtitleTrack, model: CalibrationModel) -> SubtitleTrack:
    """Map every timestamp through the inverse of the fitted model.

    Each time t becomes round((t - offset) / slope). Times that land below
    zero are clamped to 0 and the track is flagged ``negative_time_clamped``.
    Entry order and the start < end invariant are preserved.
    """
    clamped = False

    def remap(t: int) -> tuple[int, bool]:
        mapped = round((t - model.offset_ms) / model.slope)
        if mapped < 0:
            return 0, True
        return int(mapped), False

    new_entries = []
    for entry in track.entries:
        start, c1 = remap(entry.start_ms)
        end, c2 = remap(entry.end_ms)
        clamped = clamped or c1 or c2
        if end <= start:
            end = start + 1
        new_entries.append(replace(entry, start_ms=start, end_ms=end))

    flags = track.flags
    if clamped and "negative_time_clamped" not in flags:
        flags = flags + ("negative_time_clamped",)
    return SubtitleTrack(entries=tuple(new_entries), source_tag="calibrated", flags=flags)


def extend_entry_ends(track: SubtitleTrack, cap_ms: int = 1_000) -> SubtitleTrack:
    """Push each entry's end time toward the next entry's start.

    The new end is min(next start, end + cap), never earlier than the
    current end; the last entry is extended by the full cap. Speech often
    trails past the written cue, so downstream audio slicing wants the slack.
    """
    entries = list(track.entries)
    new_entries: list[SubtitleEntry] = []
    for pos, entry in enumerate(entries):
        if pos + 1 < len(entries):
            new_end = max(entry.end_ms, min(entries[pos + 1].start_ms, entry.end_ms + cap_ms))
        else:
            new_end = entry.end_ms + cap_ms
        new_entries.append(replace(entry, end_ms=new_end))
    return replace(track, entries=tuple(new_entries))


def timestamp_accuracy(
    track: SubtitleTrack, reference: SubtitleTrack, tol_ms: int = 500
) -> float:
    """Fraction of entries whose start lies within ``tol_ms`` of the
    same-position reference entry. Pairs by position over the shorter track."""
    n = min(len(track.entries), len(reference.entries))
    if n == 0:
        return 0.0
    hits = sum(
        1
        for a, b in zip(track.entries[:n], reference.entries[:n])
        if abs(a.start_ms - b.start_ms) <= tol_ms
    )
    return hits / n


def anchors_csv(anchors: list[AnchorPair]) -> str:
    """Scatter data (anchor time vs discrepancy) for diagnostic plots."""
    lines = [
        "asr_start_ms,srt_start_ms,start_discrepancy_ms,duration_discrepancy_ms,text_score"
    ]
    for p in anchors:
        lines.append(
            f"{p.asr_start_ms},{p.srt_start_ms},{p.start_discrepancy_ms},"
            f"{p.duration_discrepancy_ms},{p.text_score:.4f}"
        )
    return "\n".join(lines) + "\n"


def calibration_report(
    anchors: list[AnchorPair],
    model: CalibrationModel,
    verdict: AlignmentVerdict,
    human_verified: bool = False,
    timestamp_acc: float | None = None,
) -> dict:
    report = {
        "anchors": len(anchors),
        "offset_ms": model.offset_ms,
        "slope": model.slope,
        "residual_std_ms": model.residual_std_ms,
        "max_jump_ms": verdict.max_jump_ms,
        "verdict": verdict.verdict.value,
        "human_verified": human_verified,
    }
    if timestamp_acc is not None:
        report["timestamp_accuracy"] = timestamp_acc
    return report
