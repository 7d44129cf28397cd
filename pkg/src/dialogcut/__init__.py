"""dialogcut: curate expressive dialogue clips from movie/TV media and score
dialogue-generation systems.

The library half turns raw media plus uncalibrated subtitles into a
fine-grained dialogue manifest (subtitle calibration, tolerance-enhanced
scene segmentation, backend-driven speaker and expressiveness annotation);
the evaluation half implements the metric suite (overlap F1, WER, cp-WER,
sa-SIM, label recall, judge-score aggregation). All learned components are
pluggable backends; every algorithm here is native and oracle-tested.
"""

from .annotation import (
    INTERACTION_MODES,
    RELATIONSHIPS,
    AffectiveTriplet,
    ExpressivenessAnnotation,
    SpeakerBank,
    SpeakerRef,
    TurnAnnotation,
    validate_interaction_mode,
    validate_label,
    validate_relationship,
)
from .boundaries import (
    KeyframePool,
    SceneRange,
    ScriptedJudge,
    ScriptedOracle,
    detect_scene_ranges,
    split_long_scenes,
    update_pool,
)
from .calibration import (
    AnchorConfig,
    AnchorPair,
    CalibrationModel,
    Verdict,
    VerdictThresholds,
    apply_calibration,
    classify_alignment,
    extend_entry_ends,
    fit_translation,
    match_anchors,
)
from .keyframes import KeyframeRef, PerceptualHashSimilarity, dhash64, extract_keyframes
from .manifest import (
    BenchCriteria,
    CorpusStats,
    DialogueClip,
    Turn,
    compute_stats,
    load_manifest,
    select_bench,
    split_corpus,
)
from .metrics import (
    DiarizedTranscript,
    EvalReport,
    JudgeScores,
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
from .subtitles import (
    AsrSegment,
    NormalizationPolicy,
    SubtitleEntry,
    SubtitleTrack,
    format_timecode,
    normalize_text,
    parse_srt,
    parse_timecode,
    serialize_srt,
)

__version__ = "0.1.0"
