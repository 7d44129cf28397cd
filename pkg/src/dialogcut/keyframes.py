"""Keyframe references, extraction via an external media command, and the
cheap perceptual-hash similarity used for pool eviction.
"""

from __future__ import annotations

import shlex
import subprocess
from dataclasses import dataclass
from pathlib import Path

from .subtitles import SubtitleTrack


@dataclass(frozen=True)
class KeyframeRef:
    """One representative frame per subtitle line.

    ``subtitle_index`` is the 0-based position of the line within its track;
    ``timestamp_ms`` is the line's midpoint; ``image_ref`` is an opaque
    handle, normally a file path (may be empty in scripted tests).
    """

    subtitle_index: int
    timestamp_ms: int
    image_ref: str = ""


def keyframe_command(template: str, input_path: str, timestamp_ms: int, output_path: str) -> list[str]:
    """Expand the extraction command template into argv tokens.

    The template is split shell-style first, then ``{input}``,
    ``{timestamp}`` (seconds, millisecond precision) and ``{output}`` are
    substituted per token, so paths with spaces survive.
    """
    seconds = f"{timestamp_ms / 1000:.3f}"
    return [
        tok.format(input=input_path, timestamp=seconds, output=output_path)
        for tok in shlex.split(template)
    ]


def extract_keyframes(
    track: SubtitleTrack,
    media_path: str,
    command_template: str,
    out_dir: str | Path,
    overwrite: bool = False,
) -> list[KeyframeRef]:
    """Invoke the external media tool once per subtitle midpoint.

    The tool is a black box: one invocation must produce one image file at
    ``{output}``. Existing images are reused unless ``overwrite`` is set.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    refs: list[KeyframeRef] = []
    for pos, entry in enumerate(track.entries):
        ts = entry.midpoint_ms
        image_path = out / f"{pos:06d}.png"
        if overwrite or not image_path.exists():
            argv = keyframe_command(command_template, media_path, ts, str(image_path))
            subprocess.run(argv, check=True, capture_output=True)
        refs.append(KeyframeRef(subtitle_index=pos, timestamp_ms=ts, image_ref=str(image_path)))
    return refs


def keyframe_refs(track: SubtitleTrack) -> list[KeyframeRef]:
    """Midpoint refs without any image extraction (scripted/offline use)."""
    return [
        KeyframeRef(subtitle_index=pos, timestamp_ms=entry.midpoint_ms)
        for pos, entry in enumerate(track.entries)
    ]


def dhash64(image_path: str) -> int:
    """64-bit difference hash: 9x8 grayscale, one bit per horizontal gradient."""
    from PIL import Image

    with Image.open(image_path) as img:
        small = img.convert("L").resize((9, 8), Image.LANCZOS)
        px = small.tobytes()  # mode L: one byte per pixel, row-major
    bits = 0
    for row in range(8):
        for col in range(8):
            left = px[row * 9 + col]
            right = px[row * 9 + col + 1]
            bits = (bits << 1) | (1 if left > right else 0)
    return bits


def hash_similarity(a: int, b: int) -> float:
    """1 minus the normalized Hamming distance of two 64-bit hashes."""
    return 1.0 - bin(a ^ b).count("1") / 64.0


class PerceptualHashSimilarity:
    """Frame similarity via cached 64-bit perceptual hashes.

    Frames without an image file compare at 0.0 except to themselves.
    """

    def __init__(self):
        self._cache: dict[str, int] = {}

    def _hash(self, ref: KeyframeRef) -> int | None:
        if not ref.image_ref:
            return None
        if ref.image_ref not in self._cache:
            self._cache[ref.image_ref] = dhash64(ref.image_ref)
        return self._cache[ref.image_ref]

    def __call__(self, a: KeyframeRef, b: KeyframeRef) -> float:
        ha, hb = self._hash(a), self._hash(b)
        if ha is None or hb is None:
            return 1.0 if a == b else 0.0
        return hash_similarity(ha, hb)
