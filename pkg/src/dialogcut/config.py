"""Declarative pipeline configuration (TOML) with environment-variable
interpolation for secrets, strict unknown-key rejection, a stable config
fingerprint, and stage checkpoints for resumable runs.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import re
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib  # py311+
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from .errors import ConfigError
from .manifest import BenchCriteria
from .subtitles import NormalizationPolicy

_ENV_RE = re.compile(r"\$\{(?P<name>[A-Za-z_][A-Za-z0-9_]*)\}")


@dataclass
class PathsConfig:
    media_root: str = "."
    manifest: str = "manifest.jsonl"
    cache: str = "cache"


@dataclass
class CalibrationSection:
    tau: float = 0.85
    min_text_chars: int = 10
    slope_tol: float = 0.01
    jump_tol_ms: float = 5_000.0
    std_tol_ms: float = 500.0
    jump_window: int = 3
    extend_cap_ms: int = 1_000
    timestamp_tolerance_ms: int = 500


@dataclass
class SegmentationSection:
    b: int = 3
    pool_size: int = 5
    max_scene_duration_ms: int = 90_000
    keyframe_command: str = ""


@dataclass
class BackendSection:
    kind: str = "scripted"  # scripted | remote
    endpoint: str = ""
    model: str = ""
    auth_env: str = ""
    timeout_s: float = 60.0
    max_attempts: int = 3
    rate_per_s: float = 0.0
    fixture: str = ""  # scripted oracle/judge fixture file


@dataclass
class BackendsSection:
    oracle: BackendSection = field(default_factory=BackendSection)
    judge: BackendSection = field(default_factory=BackendSection)
    annotator: BackendSection = field(default_factory=BackendSection)


@dataclass
class BenchSection:
    required_speaker_count: int = 2
    require_all_turns_visible: bool = True
    min_intensity: int = 7
    min_volatility: int = 7

    def criteria(self) -> BenchCriteria:
        return BenchCriteria(
            required_speaker_count=self.required_speaker_count,
            require_all_turns_visible=self.require_all_turns_visible,
            min_intensity=self.min_intensity,
            min_volatility=self.min_volatility,
        )


@dataclass
class SplitSection:
    train: float = 0.9
    valid: float = 0.05
    test: float = 0.05
    seed: int = 0


@dataclass
class NormalizationSection:
    lowercase: bool = True
    strip_punctuation: bool = True
    keep_apostrophes: bool = False
    collapse_whitespace: bool = True
    drop_digits: bool = False

    def policy(self) -> NormalizationPolicy:
        return NormalizationPolicy(
            lowercase=self.lowercase,
            strip_punctuation=self.strip_punctuation,
            keep_apostrophes=self.keep_apostrophes,
            collapse_whitespace=self.collapse_whitespace,
            drop_digits=self.drop_digits,
        )


@dataclass
class ConcurrencySection:
    max_workers: int = 1


@dataclass
class PipelineConfig:
    paths: PathsConfig = field(default_factory=PathsConfig)
    calibration: CalibrationSection = field(default_factory=CalibrationSection)
    segmentation: SegmentationSection = field(default_factory=SegmentationSection)
    backends: BackendsSection = field(default_factory=BackendsSection)
    bench: BenchSection = field(default_factory=BenchSection)
    split: SplitSection = field(default_factory=SplitSection)
    normalization: NormalizationSection = field(default_factory=NormalizationSection)
    concurrency: ConcurrencySection = field(default_factory=ConcurrencySection)
    speaker_bank: dict[str, list[str]] = field(default_factory=dict)

    def validate(self) -> None:
        if self.segmentation.b < 1:
            raise ConfigError("segmentation.b must be >= 1")
        if self.segmentation.pool_size < 1:
            raise ConfigError("segmentation.pool_size must be >= 1")
        if self.concurrency.max_workers < 1:
            raise ConfigError("concurrency.max_workers must be >= 1")
        ratios = (self.split.train, self.split.valid, self.split.test)
        if abs(sum(ratios) - 1.0) > 1e-9:
            raise ConfigError(f"split ratios {ratios} must sum to 1")
        for name in ("oracle", "judge", "annotator"):
            section = getattr(self.backends, name)
            if section.kind not in ("scripted", "remote"):
                raise ConfigError(f"backends.{name}.kind must be scripted or remote")
            if section.kind == "remote" and not section.endpoint:
                raise ConfigError(f"backends.{name}.endpoint required for remote kind")

    def fingerprint(self) -> str:
        """Stable short hash of the resolved configuration.

        Credentials never enter the hash: only the *names* of auth env vars
        are part of the config.
        """
        blob = json.dumps(dataclasses.asdict(self), sort_keys=True)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:12]


def _interpolate(value):
    if isinstance(value, str):
        def repl(m: re.Match) -> str:
            name = m.group("name")
            if name not in os.environ:
                raise ConfigError(f"environment variable {name} not set")
            return os.environ[name]

        return _ENV_RE.sub(repl, value)
    if isinstance(value, list):
        return [_interpolate(v) for v in value]
    if isinstance(value, dict):
        return {k: _interpolate(v) for k, v in value.items()}
    return value


def _build_section(cls, data: dict, path: str):
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in [{path}]")
    return cls(**data)


def config_from_dict(data: dict) -> PipelineConfig:
    data = _interpolate(data)
    top_fields = {f.name for f in dataclasses.fields(PipelineConfig)}
    unknown = set(data) - top_fields
    if unknown:
        raise ConfigError(f"unknown top-level key(s) {sorted(unknown)}")

    cfg = PipelineConfig()
    simple_sections = {
        "paths": PathsConfig,
        "calibration": CalibrationSection,
        "segmentation": SegmentationSection,
        "bench": BenchSection,
        "split": SplitSection,
        "normalization": NormalizationSection,
        "concurrency": ConcurrencySection,
    }
    for key, value in data.items():
        if key in simple_sections:
            if not isinstance(value, dict):
                raise ConfigError(f"[{key}] must be a table")
            setattr(cfg, key, _build_section(simple_sections[key], value, key))
        elif key == "backends":
            if not isinstance(value, dict):
                raise ConfigError("[backends] must be a table")
            unknown_backends = set(value) - {"oracle", "judge", "annotator"}
            if unknown_backends:
                raise ConfigError(
                    f"unknown backend(s) {sorted(unknown_backends)} in [backends]"
                )
            sections = {}
            for name, sub in value.items():
                if not isinstance(sub, dict):
                    raise ConfigError(f"[backends.{name}] must be a table")
                sections[name] = _build_section(BackendSection, sub, f"backends.{name}")
            cfg.backends = BackendsSection(**{
                name: sections.get(name, BackendSection())
                for name in ("oracle", "judge", "annotator")
            })
        elif key == "speaker_bank":
            if not isinstance(value, dict):
                raise ConfigError("[speaker_bank] must map names to alias lists")
            cfg.speaker_bank = {
                str(name): [str(a) for a in aliases] for name, aliases in value.items()
            }
    try:
        cfg.validate()
    except TypeError as err:
        raise ConfigError(str(err)) from err
    return cfg


def load_config(path: str | Path, overrides: dict | None = None) -> PipelineConfig:
    """Parse and validate a TOML config file.

    ``overrides`` maps dotted keys (for example ``"segmentation.b"``) to
    values, which is how CLI flags win over the file.
    """
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError as err:
        raise ConfigError(f"config file not found: {path}") from err
    except tomllib.TOMLDecodeError as err:
        raise ConfigError(f"invalid TOML in {path}: {err}") from err

    for dotted, value in (overrides or {}).items():
        section, _, key = dotted.partition(".")
        if not key:
            raise ConfigError(f"override {dotted!r} must be section.key")
        data.setdefault(section, {})[key] = value
    return config_from_dict(data)


class StageCheckpoints:
    """Per-stage completion markers keyed by config fingerprint.

    A stage re-run with an unchanged fingerprint skips completed sources; a
    changed fingerprint resets that stage's markers.
    """

    def __init__(self, path: str | Path):
        self._path = Path(path)
        if self._path.exists():
            self._state = json.loads(self._path.read_text(encoding="utf-8"))
        else:
            self._state = {}

    def _stage(self, stage: str, fingerprint: str) -> dict:
        entry = self._state.get(stage)
        if entry is None or entry.get("fingerprint") != fingerprint:
            entry = {"fingerprint": fingerprint, "done": {}}
            self._state[stage] = entry
        return entry

    def is_done(self, stage: str, fingerprint: str, source: str) -> bool:
        entry = self._state.get(stage)
        if entry is None or entry.get("fingerprint") != fingerprint:
            return False
        return bool(entry["done"].get(source))

    def mark_done(self, stage: str, fingerprint: str, source: str) -> None:
        self._stage(stage, fingerprint)["done"][source] = True
        self._save()

    def _save(self) -> None:
        self._path.parent.mkdir(parents=True, exist_ok=True)
        self._path.write_text(
            json.dumps(self._state, indent=2, sort_keys=True), encoding="utf-8"
        )
