"""Stage orchestration: calibrate, segment, annotate, and evaluate, with
per-source failure isolation, checkpointed resumability, and structured
JSON Lines logging.

Source layout under ``paths.media_root``: one directory per source holding
``raw.srt`` (the uncalibrated subtitles), ``asr.jsonl`` (time-stamped ASR
segments), and optionally a ``media.*`` file consumed by the keyframe
extraction command. Stage outputs land under ``paths.cache/<source>/``.
"""

from __future__ import annotations

import json
import random
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Sequence

from . import annotation as anno
from . import calibration as cal
from .backends import RemoteBackend, RemoteConfig, RemoteSemanticJudge, RemoteVlmOracle
from .boundaries import (
    SceneRange,
    ScriptedJudge,
    ScriptedOracle,
    boundaries_from_scene_ids,
    detect_scene_ranges,
    ranges_to_partition,
    split_long_scenes,
)
from .config import PipelineConfig, StageCheckpoints
from .errors import (
    DialogcutError,
    EmptyInput,
    MissingInput,
    OracleUnavailable,
    SchemaViolation,
)
from .keyframes import (
    KeyframeRef,
    PerceptualHashSimilarity,
    extract_keyframes,
    keyframe_refs,
)
from .manifest import append_clips, draft_clip_from_range
from .metrics import (
    DiarizedTranscript,
    SampleMetrics,
    SpeakerEmbeddingSet,
    aggregate_report,
    cp_wer,
    f1_overlap,
    parse_judge_scores,
    sa_sim,
    wer,
)
from .subtitles import SubtitleTrack, load_asr_jsonl, parse_srt, serialize_srt


def log_event(stage: str, **fields) -> None:
    record = {"ts": round(time.time(), 3), "stage": stage}
    record.update(fields)
    print(json.dumps(record, ensure_ascii=False), file=sys.stderr)


def discover_sources(media_root: str | Path) -> list[str]:
    root = Path(media_root)
    if not root.is_dir():
        return []
    return sorted(p.name for p in root.iterdir() if p.is_dir() and (p / "raw.srt").exists())


def _find_media(source_dir: Path) -> str | None:
    for p in sorted(source_dir.iterdir()):
        if p.is_file() and p.stem == "media":
            return str(p)
    return None


def _map_sources(
    sources: Sequence[str], worker, max_workers: int
) -> dict[str, dict]:
    """Run one stage worker per source with bounded parallelism.

    A failing source is recorded, never propagated, so one bad movie cannot
    block the rest of the run.
    """
    results: dict[str, dict] = {}

    def safe(source: str) -> tuple[str, dict]:
        try:
            return source, worker(source)
        except DialogcutError as err:
            return source, {"status": "failed", "error": f"{type(err).__name__}: {err}"}

    if max_workers <= 1 or len(sources) <= 1:
        for source in sources:
            name, outcome = safe(source)
            results[name] = outcome
    else:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            for name, outcome in pool.map(safe, sources):
                results[name] = outcome
    return results


def _summary(stage: str, results: dict[str, dict]) -> dict:
    failed = sorted(s for s, r in results.items() if r.get("status") == "failed")
    summary = {
        "stage": stage,
        "sources": results,
        "failed": failed,
        "ok": len(results) - len(failed),
    }
    log_event(stage, failed=len(failed), ok=summary["ok"])
    return summary


# --- calibrate ---

def run_calibrate(config: PipelineConfig) -> dict:
    """Align every source's raw subtitles to its ASR timeline.

    Tracks judged usable (possibly after undoing a speed edit) are
    calibrated, end-extended, and written out with a diagnostic report and
    anchor scatter CSV; everything else is reported with its verdict and
    left for manual handling.
    """
    fingerprint = config.fingerprint()
    cache = Path(config.paths.cache)
    checkpoints = StageCheckpoints(cache / "checkpoints.json")
    sources = discover_sources(config.paths.media_root)
    anchor_cfg = cal.AnchorConfig(
        tau=config.calibration.tau,
        min_text_chars=config.calibration.min_text_chars,
        policy=config.normalization.policy(),
    )
    thresholds = cal.VerdictThresholds(
        slope_tol=config.calibration.slope_tol,
        jump_tol_ms=config.calibration.jump_tol_ms,
        std_tol_ms=config.calibration.std_tol_ms,
        jump_window=config.calibration.jump_window,
    )

    def worker(source: str) -> dict:
        if checkpoints.is_done("calibrate", fingerprint, source):
            return {"status": "skipped", "reason": "checkpoint"}
        source_dir = Path(config.paths.media_root) / source
        out_dir = cache / source
        out_dir.mkdir(parents=True, exist_ok=True)

        asr_path = source_dir / "asr.jsonl"
        if not asr_path.exists():
            report = {"status": "skipped", "error": "MissingInput: no asr.jsonl"}
            (out_dir / "calibration.json").write_text(
                json.dumps(report, indent=2), encoding="utf-8"
            )
            raise MissingInput(f"{source}: no asr.jsonl")
        asr = load_asr_jsonl(asr_path.read_text(encoding="utf-8"))
        track = parse_srt(
            (source_dir / "raw.srt").read_text(encoding="utf-8"), source_tag="uncalibrated"
        )

        anchors = cal.match_anchors(asr, track, anchor_cfg)
        model = cal.fit_translation(anchors)
        verdict = cal.classify_alignment(anchors, model, thresholds)
        report = cal.calibration_report(anchors, model, verdict)
        (out_dir / "anchors.csv").write_text(cal.anchors_csv(anchors), encoding="utf-8")

        usable = verdict.verdict in (cal.Verdict.USABLE, cal.Verdict.EDITED_SPEED)
        if usable:
            calibrated = cal.apply_calibration(track, model)
            calibrated = cal.extend_entry_ends(calibrated, config.calibration.extend_cap_ms)
            (out_dir / "calibrated.srt").write_text(
                serialize_srt(calibrated), encoding="utf-8"
            )
            report["calibrated"] = True
            report["track_flags"] = list(calibrated.flags)
        else:
            report["calibrated"] = False
        (out_dir / "calibration.json").write_text(
            json.dumps(report, indent=2), encoding="utf-8"
        )
        checkpoints.mark_done("calibrate", fingerprint, source)
        return {"status": "ok", "verdict": verdict.verdict.value, "calibrated": usable}

    results = _map_sources(sources, worker, config.concurrency.max_workers)
    return _summary("calibrate", results)


# --- segment ---

def _load_fixture(path: str) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def build_oracle(config: PipelineConfig, source: str):
    section = config.backends.oracle
    if section.kind == "remote":
        return RemoteVlmOracle(RemoteConfig(
            endpoint=section.endpoint,
            model=section.model,
            auth_env=section.auth_env,
            timeout_s=section.timeout_s,
            max_attempts=section.max_attempts,
            rate_per_s=section.rate_per_s,
        ))
    if not section.fixture:
        raise MissingInput("scripted oracle needs backends.oracle.fixture")
    scene_ids = _load_fixture(section.fixture).get(source)
    if scene_ids is None:
        raise MissingInput(f"oracle fixture has no scene ids for {source}")
    return ScriptedOracle(scene_ids)


def build_judge(config: PipelineConfig):
    section = config.backends.judge
    if section.kind == "remote":
        return RemoteSemanticJudge(RemoteConfig(
            endpoint=section.endpoint,
            model=section.model,
            auth_env=section.auth_env,
            timeout_s=section.timeout_s,
            max_attempts=section.max_attempts,
            rate_per_s=section.rate_per_s,
        ))
    if section.fixture:
        raw = _load_fixture(section.fixture)
        splits = {
            tuple(int(x) for x in key.split("-")): points
            for key, points in raw.items()
        }
        return ScriptedJudge(splits)
    return ScriptedJudge()


def build_annotator(config: PipelineConfig, bank: anno.SpeakerBank):
    section = config.backends.annotator
    if section.kind == "remote":
        return RemoteBackend(RemoteConfig(
            endpoint=section.endpoint,
            model=section.model,
            auth_env=section.auth_env,
            timeout_s=section.timeout_s,
            max_attempts=section.max_attempts,
            rate_per_s=section.rate_per_s,
        ))
    return anno.ScriptedBackend.auto(bank)


def _load_calibrated_track(cache: Path, source: str) -> SubtitleTrack:
    path = cache / source / "calibrated.srt"
    if not path.exists():
        raise MissingInput(f"{source}: not calibrated (run calibrate first)")
    return parse_srt(path.read_text(encoding="utf-8"), source_tag="calibrated")


def run_segment(config: PipelineConfig, oracle=None, judge=None) -> dict:
    """Detect scene ranges over each calibrated source and split long ones.

    ``oracle`` and ``judge`` default to whatever the config wires up; tests
    inject their own. Ranges are persisted with oracle-call counts; an
    oracle outage aborts the source but keeps its committed ranges.
    """
    fingerprint = config.fingerprint()
    cache = Path(config.paths.cache)
    checkpoints = StageCheckpoints(cache / "checkpoints.json")
    sources = discover_sources(config.paths.media_root)
    sim = PerceptualHashSimilarity()

    # remote clients are shared so their rate limit is global across workers;
    # scripted oracles stay per-source (their fixtures are keyed by source)
    shared_oracle = oracle
    if shared_oracle is None and config.backends.oracle.kind == "remote":
        shared_oracle = build_oracle(config, "")
    shared_judge = judge if judge is not None else build_judge(config)

    def worker(source: str) -> dict:
        if checkpoints.is_done("segment", fingerprint, source):
            return {"status": "skipped", "reason": "checkpoint"}
        track = _load_calibrated_track(cache, source)
        source_dir = Path(config.paths.media_root) / source
        media = _find_media(source_dir)
        if config.segmentation.keyframe_command and media:
            frames = extract_keyframes(
                track, media, config.segmentation.keyframe_command,
                cache / source / "frames",
            )
        else:
            frames = keyframe_refs(track)

        src_oracle = shared_oracle if shared_oracle is not None else build_oracle(config, source)
        src_judge = shared_judge
        out_path = cache / source / "ranges.json"
        try:
            ranges = detect_scene_ranges(
                frames, src_oracle, sim,
                b=config.segmentation.b, m=config.segmentation.pool_size,
            )
        except OracleUnavailable as err:
            payload = {
                "ranges": [
                    {"first": r.first, "last": r.last, "flags": list(r.flags)}
                    for r in err.committed
                ],
                "oracle_calls": getattr(src_oracle, "calls", None),
                "error": str(err),
            }
            out_path.write_text(json.dumps(payload, indent=2), encoding="utf-8")
            raise
        ranges = split_long_scenes(
            ranges, track, src_judge, config.segmentation.max_scene_duration_ms
        )
        payload = {
            "ranges": [
                {"first": r.first, "last": r.last, "flags": list(r.flags)}
                for r in ranges
            ],
            "oracle_calls": getattr(src_oracle, "calls", None),
        }
        out_path.write_text(json.dumps(payload, indent=2), encoding="utf-8")
        checkpoints.mark_done("segment", fingerprint, source)
        return {"status": "ok", "ranges": len(ranges)}

    results = _map_sources(sources, worker, config.concurrency.max_workers)
    return _summary("segment", results)


# --- annotate ---

def speaker_bank_from_config(config: PipelineConfig) -> anno.SpeakerBank:
    return anno.SpeakerBank(entries=tuple(
        anno.SpeakerRef(canonical_name=name, aliases=tuple(aliases))
        for name, aliases in config.speaker_bank.items()
    ))


def annotate_clip(clip, track_slice, bank, backend, max_attempts: int = 3):
    """Attribution then expressiveness for one clip, with bounded retries.

    Returns the annotated clip; schema or vocabulary violations that survive
    the retry budget mark the clip ``annotation_failed`` with the speakers
    left as ``unknown`` so the row is still persisted, never dropped.
    """
    request = anno.build_attribution_request(clip, track_slice, bank)
    annotations = None
    last_error = ""
    for _ in range(max_attempts):
        try:
            annotations = anno.parse_attribution_response(
                backend.complete(request), clip, bank
            )
            break
        except (SchemaViolation,) as err:
            last_error = f"{type(err).__name__}: {err}"
    if annotations is None:
        turns = tuple(replace(t, speaker="unknown") for t in clip.turns)
        return replace(clip, turns=turns).with_flag("annotation_failed"), last_error

    turns = tuple(
        replace(
            turn,
            speaker=a.speaker,
            nonverbal=a.nonverbal,
            visible=a.visible,
        )
        for turn, a in zip(clip.turns, annotations)
    )
    clip = replace(clip, turns=turns)
    if any(a.off_bank for a in annotations):
        clip = clip.with_flag("off_bank")

    request = anno.build_expressiveness_request(clip, bank)
    for _ in range(max_attempts):
        try:
            expressiveness = anno.parse_expressiveness_response(
                backend.complete(request), clip
            )
            return replace(clip, expressiveness=expressiveness), ""
        except DialogcutError as err:
            last_error = f"{type(err).__name__}: {err}"
    return clip.with_flag("annotation_failed"), last_error


def run_annotate(config: PipelineConfig, backend=None) -> dict:
    """Turn persisted ranges into validated manifest rows."""
    fingerprint = config.fingerprint()
    cache = Path(config.paths.cache)
    checkpoints = StageCheckpoints(cache / "checkpoints.json")
    sources = discover_sources(config.paths.media_root)
    bank = speaker_bank_from_config(config)
    annotator = backend if backend is not None else build_annotator(config, bank)
    manifest_path = Path(config.paths.manifest)
    manifest_path.parent.mkdir(parents=True, exist_ok=True)
    versions = {
        "prompt_template": f"{anno.ATTRIBUTION_TEMPLATE_VERSION}+{anno.EXPRESSIVENESS_TEMPLATE_VERSION}",
        "config_fingerprint": fingerprint,
    }

    def worker(source: str) -> dict:
        if checkpoints.is_done("annotate", fingerprint, source):
            return {"status": "skipped", "reason": "checkpoint"}
        ranges_path = cache / source / "ranges.json"
        if not ranges_path.exists():
            raise MissingInput(f"{source}: no ranges.json (run segment first)")
        payload = json.loads(ranges_path.read_text(encoding="utf-8"))
        if payload.get("error"):
            raise MissingInput(f"{source}: segmentation incomplete: {payload['error']}")
        track = _load_calibrated_track(cache, source)
        calib = json.loads((cache / source / "calibration.json").read_text(encoding="utf-8"))
        human_verified = bool(calib.get("human_verified"))

        source_dir = Path(config.paths.media_root) / source
        media = _find_media(source_dir)
        media_refs = (media,) if media else ()

        clips = []
        failures = 0
        for entry in payload["ranges"]:
            rng = SceneRange(
                first=entry["first"], last=entry["last"], flags=tuple(entry.get("flags", []))
            )
            slice_track = SubtitleTrack(
                entries=track.entries[rng.first:rng.last + 1], source_tag=track.source_tag
            )
            clip = draft_clip_from_range(
                source, rng, track, media_refs=media_refs, pipeline_versions=versions
            )
            clip, error = annotate_clip(
                clip, slice_track, bank, annotator,
                max_attempts=config.backends.annotator.max_attempts,
            )
            if human_verified:
                clip = clip.with_flag("human_verified")
            if "annotation_failed" in clip.flags:
                failures += 1
                log_event("annotate", source=source, clip=clip.id, error=error)
            clips.append(clip)
        append_clips(manifest_path, clips)
        checkpoints.mark_done("annotate", fingerprint, source)
        return {"status": "ok", "clips": len(clips), "annotation_failures": failures}

    results = _map_sources(sources, worker, config.concurrency.max_workers)
    return _summary("annotate", results)


# --- eval ---

def _transcript_from_rows(rows: list) -> DiarizedTranscript:
    return DiarizedTranscript(utterances=tuple(
        (row["speaker"], row["text"]) for row in rows
    ))


def _embeddings_from_obj(obj: dict) -> SpeakerEmbeddingSet:
    import numpy as np

    return SpeakerEmbeddingSet(vectors={
        speaker: np.asarray(vectors, dtype=float) for speaker, vectors in obj.items()
    })


def eval_sample(obj: dict, policy) -> SampleMetrics:
    """Score one system-output record.

    Required fields: ``id``, ``reference`` and ``hypothesis`` (lists of
    ``{"speaker", "text"}``). Optional: per-speaker embedding lists, a raw
    judge reply, human ratings, gold/predicted labels, and externally
    computed metric values, each feeding its metric only when present.
    """
    reference = _transcript_from_rows(obj["reference"])
    hypothesis = _transcript_from_rows(obj["hypothesis"])
    ref_text = " ".join(text for _, text in reference.utterances)
    hyp_text = " ".join(text for _, text in hypothesis.utterances)

    sa = None
    if "reference_embeddings" in obj and "hypothesis_embeddings" in obj:
        sa = sa_sim(
            _embeddings_from_obj(obj["reference_embeddings"]),
            _embeddings_from_obj(obj["hypothesis_embeddings"]),
        )
    judge = parse_judge_scores(obj["judge_reply"]) if "judge_reply" in obj else None

    return SampleMetrics(
        sample_id=str(obj["id"]),
        wer=wer(ref_text, hyp_text, policy),
        cp_wer=cp_wer(reference, hypothesis, policy),
        sa_sim=sa,
        judge=judge,
        ratings=dict(obj.get("ratings", {})),
        gold_relationship=obj.get("gold_relationship"),
        predicted_relationship=obj.get("predicted_relationship"),
        gold_interaction=obj.get("gold_interaction"),
        predicted_interaction=obj.get("predicted_interaction"),
        external=dict(obj.get("external", {})),
    )


def run_eval(config: PipelineConfig, system_outputs: str | Path) -> tuple[dict, list[dict]]:
    """Score a system-output JSON Lines file into a full report.

    Returns (report dict, per-sample dicts); the CLI writes both out.
    """
    policy = config.normalization.policy()
    samples = []
    with open(system_outputs, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                samples.append(eval_sample(json.loads(line), policy))
    if not samples:
        raise EmptyInput(f"no samples in {system_outputs}")
    report = aggregate_report(
        samples,
        config_fingerprint=config.fingerprint(),
        policy=policy,
        relationship_vocabulary=anno.RELATIONSHIPS,
        interaction_vocabulary=anno.INTERACTION_MODES,
    )
    return report.as_dict(), [s.as_dict() for s in samples]


# --- simulate (stride ablation) ---

def random_scene_ids(
    rng: random.Random,
    scene_count_range: tuple[int, int] = (2, 10),
    frames_per_scene_range: tuple[int, int] = (6, 12),
) -> list[str]:
    ids = []
    for scene in range(rng.randint(*scene_count_range)):
        ids.extend([f"S{scene}"] * rng.randint(*frames_per_scene_range))
    return ids


def simulate_stride_sweep(
    sequences: int = 200,
    lie_probability: float = 0.1,
    b_values: Sequence[int] = (1, 2, 3, 4, 5),
    m: int = 5,
    seed: int = 0,
    frames_per_scene_range: tuple[int, int] = (6, 12),
) -> dict:
    """Measure segmentation quality against ground truth per stride value.

    Random scene-ID sequences are segmented with a scripted oracle that lies
    with the given probability; each stride's mean overlap F1 against the
    true boundaries and its mean oracle-call count are reported.
    """
    rng = random.Random(seed)
    fixtures = [
        random_scene_ids(rng, frames_per_scene_range=frames_per_scene_range)
        for _ in range(sequences)
    ]
    sim = PerceptualHashSimilarity()
    table: dict[int, dict[str, float]] = {}
    for b in b_values:
        scores = []
        calls = []
        for i, scene_ids in enumerate(fixtures):
            truth = ranges_to_partition(boundaries_from_scene_ids(scene_ids))
            oracle = ScriptedOracle(
                scene_ids, lie_probability=lie_probability, seed=seed * 100_003 + i
            )
            frames = [
                KeyframeRef(subtitle_index=k, timestamp_ms=k * 1000)
                for k in range(len(scene_ids))
            ]
            detected = detect_scene_ranges(frames, oracle, sim, b=b, m=m)
            scores.append(f1_overlap(ranges_to_partition(detected), truth))
            calls.append(oracle.calls)
        table[b] = {
            "mean_f1_overlap": sum(scores) / len(scores),
            "mean_oracle_calls": sum(calls) / len(calls),
        }
    return {
        "sequences": sequences,
        "lie_probability": lie_probability,
        "pool_size": m,
        "seed": seed,
        "by_stride": table,
    }


def format_stride_table(result: dict) -> str:
    lines = ["stride_b  mean_f1_overlap  mean_oracle_calls"]
    for b, row in sorted(result["by_stride"].items()):
        lines.append(
            f"{b:>8}  {row['mean_f1_overlap']:>15.3f}  {row['mean_oracle_calls']:>17.1f}"
        )
    return "\n".join(lines)
