"""Speaker attribution and expressiveness annotation through pluggable
backends, with strict schema and vocabulary validation.

Backends return structured text (JSON); anything that does not parse against
the expected schema is rejected outright rather than heuristically repaired,
so bad rows surface as flags instead of silently polluting the corpus.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from typing import Callable, Mapping, Protocol, Sequence

from .errors import (
    MissingMedia,
    MissingSpeakerDescription,
    SchemaViolation,
    ScoreOutOfRange,
    VocabViolation,
)

# Closed vocabulary: who the interlocutors are to each other.
RELATIONSHIPS = (
    "Workplace",
    "Friends",
    "Intimate",
    "Family",
    "Adversarial",
    "Individual",
    "Social",
    "Authority",
)

# Closed vocabulary: the shape of the exchange.
INTERACTION_MODES = (
    "Suggesting",
    "Conflict",
    "Questioning",
    "Narration",
    "Explanation",
    "Commands",
    "Dynamic Cross-talk",
    "Sympathizing",
    "Rejection",
    "Banter",
    "Authority Power",
    "Performance",
    "Reflection",
    "Emotion Release",
    "Invitation",
)

RELATIONSHIP_SYNONYMS: dict[str, tuple[str, ...]] = {
    "Workplace": ("Colleague", "Boss", "Manager", "Coworker", "Client"),
    "Friends": ("Buddy", "Pal", "Companion", "Mate", "Peer"),
    "Intimate": ("Boyfriend", "Girlfriend", "Partner", "Spouse", "Fiancé", "Fiance", "Lover"),
    "Family": ("Mother", "Father", "Sibling", "Uncle", "Cousin"),
    "Adversarial": ("Enemy", "Opponent", "Rival", "Antagonist", "Competitor"),
    "Individual": ("Solo", "Loner", "Isolated", "Monologue", "Alone"),
    "Social": ("Teacher", "Doctor", "Neighbor", "Stranger", "Host", "Customer"),
    "Authority": ("King", "Judge", "Mayor", "President", "General"),
}

INTERACTION_SYNONYMS: dict[str, tuple[str, ...]] = {
    "Suggesting": ("Persuasion", "Convincing", "Negotiation"),
    "Conflict": ("Argument", "Disagreement", "Accusation"),
    "Questioning": ("Inquiry", "Interrogation", "Probing"),
    "Narration": ("Storytelling", "Flashback", "Monologue"),
    "Explanation": ("Justification", "Diagnosis", "Clarification"),
    "Commands": ("Orders", "Demands", "Instruction"),
    "Dynamic Cross-talk": ("Interjection", "Interruption", "Cross-talk"),
    "Sympathizing": ("Comfort", "Support", "Encouragement"),
    "Rejection": ("Refusal", "Dismissal", "Avoidance"),
    "Banter": ("Teasing", "Flirting", "Joke"),
    "Authority Power": ("Domination", "Criticism", "Intervention"),
    "Performance": ("Presentation", "Speech", "Announcement"),
    "Reflection": ("Introspection", "Revelation", "Discovery"),
    "Emotion Release": ("Venting", "Confession"),
    "Invitation": ("Offer",),
}

# Open tag list for non-verbal vocalizations; novel tags get an x- prefix.
NONVERBAL_TAGS = (
    "sigh", "laugh", "chuckle", "giggle", "cry", "sob", "gasp", "groan",
    "grunt", "scream", "shout", "whisper", "cough", "sniff", "breath",
    "pause", "scoff", "hum", "yawn", "kiss",
)

SCORE_MIN = 1
SCORE_MAX = 10

ATTRIBUTION_TEMPLATE_VERSION = "attribution-v1"
EXPRESSIVENESS_TEMPLATE_VERSION = "expressiveness-v1"

_ATTRIBUTION_PROMPT = """\
You are labeling one dialogue clip from a film or series. Watch and listen to
the attached media, then attribute every subtitle line to its speaker.
{speaker_instruction}
For each line also list any non-verbal vocalizations (for example sigh,
laugh, gasp) and whether the active speaker's face is visible in the aligned
keyframe.

Transcript:
{transcript}

Reply with a single JSON object, no prose:
{{"lines": [{{"index": <line index>, "speaker": "<name>", "nonverbal": ["<tag>", ...], "visible": <true|false>}}, ...]}}
"""

_BANK_INSTRUCTION = (
    "Use exactly these character names when they speak: {names}. "
    "If someone outside this list speaks, name them by their on-screen persona."
)
_PERSONA_INSTRUCTION = (
    "No character bank is available: name each speaker by their on-screen "
    "persona (for example \"the bartender\")."
)

_EXPRESSIVENESS_PROMPT = """\
You are rating the interaction style of one dialogue clip. The speakers are:
{speakers}.

Transcript:
{transcript}

Choose relationship from: {relationships}.
Choose interaction_mode from: {modes}.
Give emotional_tone as a short free-form label, one style-trajectory
description per speaker, and two integer scores in [{lo},{hi}]: intensity
(global emotional strength of the dialogue) and volatility (turn-to-turn
emotional variability).

Reply with a single JSON object, no prose:
{{"relationship": "...", "interaction_mode": "...", "emotional_tone": "...", "descriptions": {{"<speaker>": "...", ...}}, "intensity": <int>, "volatility": <int>}}
"""

_JUDGE_PROMPT = """\
Rate the generated dialogue audio against the reference on a 1-5 scale for:
spontaneity, coherence, intelligibility, similarity (timbre), quality, and
instruction_following.

Reply with a single JSON object, no prose:
{{"spontaneity": <1-5>, "coherence": <1-5>, "intelligibility": <1-5>, "similarity": <1-5>, "quality": <1-5>, "instruction_following": <1-5>}}
"""

JUDGE_TEMPLATE_VERSION = "judge-v1"


def judge_prompt() -> str:
    return _JUDGE_PROMPT


def _build_reverse(
    vocabulary: Sequence[str], synonyms: Mapping[str, Sequence[str]]
) -> dict[str, str]:
    reverse: dict[str, str] = {}
    for canonical in vocabulary:
        reverse[canonical.lower()] = canonical
    for canonical, names in synonyms.items():
        for name in names:
            key = name.lower()
            if key in reverse and reverse[key] != canonical:
                raise ValueError(f"ambiguous synonym {name!r}")
            reverse[key] = canonical
    return reverse

_RELATIONSHIP_REVERSE = _build_reverse(RELATIONSHIPS, RELATIONSHIP_SYNONYMS)
_INTERACTION_REVERSE = _build_reverse(INTERACTION_MODES, INTERACTION_SYNONYMS)


def validate_label(
    label: str,
    vocabulary: Sequence[str],
    synonyms: Mapping[str, Sequence[str]],
) -> str:
    """Map a raw label onto its canonical category.

    Matching is case-insensitive, falls back to the synonym table and then
    to a naive singular form (trailing 's' stripped). Anything else fails
    closed with :class:`VocabViolation`.
    """
    reverse = _build_reverse(vocabulary, synonyms)
    key = label.strip().lower()
    if key in reverse:
        return reverse[key]
    if key.endswith("s") and key[:-1] in reverse:
        return reverse[key[:-1]]
    raise VocabViolation(f"label {label!r} not in vocabulary")


def validate_relationship(label: str) -> str:
    key = label.strip().lower()
    if key in _RELATIONSHIP_REVERSE:
        return _RELATIONSHIP_REVERSE[key]
    if key.endswith("s") and key[:-1] in _RELATIONSHIP_REVERSE:
        return _RELATIONSHIP_REVERSE[key[:-1]]
    raise VocabViolation(f"relationship {label!r} not in vocabulary")


def validate_interaction_mode(label: str) -> str:
    key = label.strip().lower()
    if key in _INTERACTION_REVERSE:
        return _INTERACTION_REVERSE[key]
    if key.endswith("s") and key[:-1] in _INTERACTION_REVERSE:
        return _INTERACTION_REVERSE[key[:-1]]
    raise VocabViolation(f"interaction mode {label!r} not in vocabulary")


def normalize_nonverbal_tag(tag: str) -> str:
    t = tag.strip().lower()
    if t in NONVERBAL_TAGS or t.startswith("x-"):
        return t
    return f"x-{t}"


@dataclass(frozen=True)
class SpeakerRef:
    canonical_name: str
    aliases: tuple[str, ...] = ()
    reference_note: str = ""


@dataclass(frozen=True)
class SpeakerBank:
    """The main-character bank attribution prompts are seeded with."""

    entries: tuple[SpeakerRef, ...] = ()

    def __post_init__(self):
        seen = set()
        for ref in self.entries:
            key = ref.canonical_name.lower()
            if key in seen:
                raise ValueError(f"duplicate canonical name {ref.canonical_name!r}")
            seen.add(key)

    def resolve(self, name: str) -> str | None:
        key = name.strip().lower()
        for ref in self.entries:
            if ref.canonical_name.lower() == key:
                return ref.canonical_name
            if any(alias.lower() == key for alias in ref.aliases):
                return ref.canonical_name
        return None

    def names(self) -> list[str]:
        return [ref.canonical_name for ref in self.entries]


@dataclass(frozen=True)
class TurnAnnotation:
    subtitle_index: int
    speaker: str
    nonverbal: tuple[str, ...] = ()
    visible: bool = False
    off_bank: bool = False


@dataclass(frozen=True)
class AffectiveTriplet:
    relationship: str
    interaction_mode: str
    emotional_tone: str


@dataclass(frozen=True)
class ExpressivenessAnnotation:
    triplet: AffectiveTriplet
    descriptions: Mapping[str, str]
    intensity: int
    volatility: int


@dataclass(frozen=True)
class RequestBundle:
    """Everything one backend call needs; built deterministically."""

    task: str  # "attribution" | "expressiveness"
    clip_id: str
    prompt: str
    transcript: tuple[tuple[int, str], ...]
    media_refs: tuple[str, ...] = ()
    speakers: tuple[str, ...] = ()
    template_version: str = ""


class AnnotationBackend(Protocol):
    def complete(self, request: RequestBundle) -> str:
        """Return the raw structured-text reply for a request."""
        ...


class FaceVisibilityBackend(Protocol):
    def visible(self, image_ref: str) -> bool:
        """Whether a main speaker's face shows in the given keyframe."""
        ...


def _check_media(media_refs: Sequence[str]) -> None:
    for ref in media_refs:
        if "://" in ref:
            continue
        if not os.path.exists(ref):
            raise MissingMedia(f"media reference not found: {ref}")


def build_attribution_request(clip, track_slice, bank: SpeakerBank) -> RequestBundle:
    """Assemble the speaker-attribution request for one clip.

    With a non-empty bank the prompt pins the allowed names; with an empty
    bank it asks for persona-based naming. Raises :class:`MissingMedia` when
    a local media reference does not resolve.
    """
    _check_media(clip.media_refs)
    if bank.entries:
        instruction = _BANK_INSTRUCTION.format(names=", ".join(bank.names()))
    else:
        instruction = _PERSONA_INSTRUCTION
    transcript = tuple(
        (pos, entry.flat_text)
        for pos, entry in zip(clip.turn_indices(), track_slice.entries)
    )
    rendered = "\n".join(f"{pos}: {text}" for pos, text in transcript)
    prompt = _ATTRIBUTION_PROMPT.format(
        speaker_instruction=instruction, transcript=rendered
    )
    return RequestBundle(
        task="attribution",
        clip_id=clip.id,
        prompt=prompt,
        transcript=transcript,
        media_refs=tuple(clip.media_refs),
        template_version=ATTRIBUTION_TEMPLATE_VERSION,
    )


def build_expressiveness_request(clip, bank: SpeakerBank) -> RequestBundle:
    """Assemble the expressiveness request; runs after attribution."""
    _check_media(clip.media_refs)
    speakers = tuple(clip.speakers())
    transcript = tuple(
        (turn.subtitle_index, f"{turn.speaker}: {turn.text}") for turn in clip.turns
    )
    rendered = "\n".join(text for _, text in transcript)
    prompt = _EXPRESSIVENESS_PROMPT.format(
        speakers=", ".join(speakers),
        transcript=rendered,
        relationships=", ".join(RELATIONSHIPS),
        modes=", ".join(INTERACTION_MODES),
        lo=SCORE_MIN,
        hi=SCORE_MAX,
    )
    return RequestBundle(
        task="expressiveness",
        clip_id=clip.id,
        prompt=prompt,
        transcript=transcript,
        media_refs=tuple(clip.media_refs),
        speakers=speakers,
        template_version=EXPRESSIVENESS_TEMPLATE_VERSION,
    )


def _load_json_object(raw: str) -> dict:
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as err:
        raise SchemaViolation(f"reply is not valid JSON: {err}") from err
    if not isinstance(obj, dict):
        raise SchemaViolation("reply is not a JSON object")
    return obj


def parse_attribution_response(raw: str, clip, bank: SpeakerBank) -> list[TurnAnnotation]:
    """Parse a structured attribution reply into per-line annotations.

    The reply must cover every subtitle line of the clip exactly once.
    Speaker strings are mapped to canonical bank names through the alias
    table; anything unresolved is preserved verbatim and marked off-bank.
    Raises :class:`SchemaViolation` on missing lines, duplicate indices, or
    malformed structure.
    """
    obj = _load_json_object(raw)
    lines = obj.get("lines")
    if not isinstance(lines, list):
        raise SchemaViolation("missing 'lines' array")

    expected = list(clip.turn_indices())
    by_index: dict[int, TurnAnnotation] = {}
    for item in lines:
        if not isinstance(item, dict):
            raise SchemaViolation("line entry is not an object")
        try:
            idx = item["index"]
            speaker = item["speaker"]
        except KeyError as err:
            raise SchemaViolation(f"line entry missing {err}") from err
        if not isinstance(idx, int) or isinstance(idx, bool):
            raise SchemaViolation(f"line index {idx!r} is not an integer")
        if idx in by_index:
            raise SchemaViolation(f"duplicate line index {idx}")
        if not isinstance(speaker, str) or not speaker.strip():
            raise SchemaViolation(f"line {idx}: empty speaker")
        visible = item.get("visible", False)
        if not isinstance(visible, bool):
            raise SchemaViolation(f"line {idx}: 'visible' is not a boolean")
        raw_tags = item.get("nonverbal", [])
        if not isinstance(raw_tags, list) or not all(isinstance(t, str) for t in raw_tags):
            raise SchemaViolation(f"line {idx}: 'nonverbal' is not a list of strings")
        canonical = bank.resolve(speaker)
        by_index[idx] = TurnAnnotation(
            subtitle_index=idx,
            speaker=canonical if canonical is not None else speaker.strip(),
            nonverbal=tuple(normalize_nonverbal_tag(t) for t in raw_tags),
            visible=visible,
            off_bank=canonical is None,
        )

    missing = [i for i in expected if i not in by_index]
    if missing:
        raise SchemaViolation(f"reply missing line indices {missing}")
    extra = [i for i in by_index if i not in set(expected)]
    if extra:
        raise SchemaViolation(f"reply has unknown line indices {sorted(extra)}")
    return [by_index[i] for i in expected]


def parse_expressiveness_response(
    raw: str,
    clip,
    score_min: int = SCORE_MIN,
    score_max: int = SCORE_MAX,
) -> ExpressivenessAnnotation:
    """Parse and validate a structured expressiveness reply.

    Relationship and interaction mode must normalize into the closed
    vocabularies, scores must be integers within bounds, and the per-speaker
    descriptions must cover exactly the clip's speakers.
    """
    obj = _load_json_object(raw)
    for key in ("relationship", "interaction_mode", "emotional_tone", "descriptions",
                "intensity", "volatility"):
        if key not in obj:
            raise SchemaViolation(f"missing key {key!r}")

    tone = obj["emotional_tone"]
    if not isinstance(tone, str) or not tone.strip():
        raise SchemaViolation("emotional_tone must be a non-empty string")

    triplet = AffectiveTriplet(
        relationship=validate_relationship(str(obj["relationship"])),
        interaction_mode=validate_interaction_mode(str(obj["interaction_mode"])),
        emotional_tone=tone.strip(),
    )

    scores = {}
    for key in ("intensity", "volatility"):
        value = obj[key]
        if isinstance(value, bool) or not isinstance(value, int):
            raise SchemaViolation(f"{key} must be an integer")
        if not score_min <= value <= score_max:
            raise ScoreOutOfRange(
                f"{key} {value} outside [{score_min}, {score_max}]"
            )
        scores[key] = value

    descriptions = obj["descriptions"]
    if not isinstance(descriptions, dict) or not all(
        isinstance(k, str) and isinstance(v, str) and v.strip()
        for k, v in descriptions.items()
    ):
        raise SchemaViolation("descriptions must map speaker to non-empty text")
    clip_speakers = set(clip.speakers())
    missing = clip_speakers - set(descriptions)
    if missing:
        raise MissingSpeakerDescription(f"no description for {sorted(missing)}")
    unknown = set(descriptions) - clip_speakers
    if unknown:
        raise SchemaViolation(f"descriptions for unknown speakers {sorted(unknown)}")

    return ExpressivenessAnnotation(
        triplet=triplet,
        descriptions=dict(descriptions),
        intensity=scores["intensity"],
        volatility=scores["volatility"],
    )


class ScriptedBackend:
    """Fixture backend: a handler renders a reply per request.

    ``auto()`` builds a backend that answers every request with a valid
    reply derived from the request itself, which is what the end-to-end
    fixtures run on.
    """

    def __init__(self, handler: Callable[[RequestBundle], str]):
        self._handler = handler
        self.calls = 0

    def complete(self, request: RequestBundle) -> str:
        self.calls += 1
        return self._handler(request)

    @classmethod
    def from_queues(cls, queues: Mapping[str, Sequence[str]]) -> "ScriptedBackend":
        pending = {task: list(replies) for task, replies in queues.items()}

        def handler(request: RequestBundle) -> str:
            if not pending.get(request.task):
                raise SchemaViolation(f"no scripted reply left for task {request.task!r}")
            return pending[request.task].pop(0)

        return cls(handler)

    @classmethod
    def auto(
        cls,
        bank: SpeakerBank | None = None,
        relationship: str = "Friends",
        mode: str = "Banter",
        tone: str = "warm",
        intensity: int = 8,
        volatility: int = 8,
    ) -> "ScriptedBackend":
        names = bank.names() if bank and bank.entries else ["Speaker 1", "Speaker 2"]

        def handler(request: RequestBundle) -> str:
            if request.task == "attribution":
                lines = [
                    {
                        "index": pos,
                        "speaker": names[k % len(names)],
                        "nonverbal": [],
                        "visible": True,
                    }
                    for k, (pos, _) in enumerate(request.transcript)
                ]
                return json.dumps({"lines": lines})
            if request.task == "expressiveness":
                return json.dumps(
                    {
                        "relationship": relationship,
                        "interaction_mode": mode,
                        "emotional_tone": tone,
                        "descriptions": {
                            s: f"{s} keeps a steady {tone} delivery"
                            for s in request.speakers
                        },
                        "intensity": intensity,
                        "volatility": volatility,
                    }
                )
            raise SchemaViolation(f"unknown task {request.task!r}")

        return cls(handler)


class ScriptedFaceVisibility:
    """Fixture face detector keyed by image reference."""

    def __init__(self, visible_refs: Mapping[str, bool] | None = None, default: bool = True):
        self._refs = dict(visible_refs or {})
        self._default = default

    def visible(self, image_ref: str) -> bool:
        return self._refs.get(image_ref, self._default)
