"""Remote backend clients: a shared retrying HTTP transport with rate
limiting, the vision continuity oracle, the annotation backend, and the
text-only semantic judge.

Every client takes an injectable ``post`` callable so tests can exercise the
wire contract, retries, and failure paths without a network.
"""

from __future__ import annotations

import base64
import os
import random
import threading
import time
from dataclasses import dataclass
from typing import Callable, Sequence

from .annotation import RequestBundle
from .errors import JudgeUnavailable, OracleUnavailable, SchemaViolation
from .keyframes import KeyframeRef

# post(url, payload, headers, timeout_s) -> (status_code, response_json)
PostFn = Callable[[str, dict, dict, float], tuple[int, dict]]


def requests_post(url: str, payload: dict, headers: dict, timeout_s: float) -> tuple[int, dict]:
    import requests

    resp = requests.post(url, json=payload, headers=headers, timeout=timeout_s)
    try:
        body = resp.json()
    except ValueError:
        body = {}
    return resp.status_code, body


class RateLimiter:
    """Thread-safe minimum-interval limiter shared across workers."""

    def __init__(self, rate_per_s: float, sleep: Callable[[float], None] = time.sleep):
        self._interval = 1.0 / rate_per_s if rate_per_s > 0 else 0.0
        self._sleep = sleep
        self._lock = threading.Lock()
        self._next_at = 0.0

    def acquire(self) -> None:
        if self._interval == 0.0:
            return
        with self._lock:
            now = time.monotonic()
            wait = self._next_at - now
            self._next_at = max(now, self._next_at) + self._interval
        if wait > 0:
            self._sleep(wait)


@dataclass
class RemoteConfig:
    endpoint: str
    model: str = ""
    auth_env: str = ""  # name of the env var holding the token
    timeout_s: float = 60.0
    max_attempts: int = 3
    backoff_s: float = 0.5
    rate_per_s: float = 0.0

    def headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        if self.auth_env:
            token = os.environ.get(self.auth_env, "")
            if token:
                headers["Authorization"] = f"Bearer {token}"
        return headers


class _RemoteClient:
    def __init__(
        self,
        config: RemoteConfig,
        post: PostFn = requests_post,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self._config = config
        self._post = post
        self._sleep = sleep
        self._limiter = RateLimiter(config.rate_per_s, sleep=sleep)
        self._rng = random.Random(0)
        self.calls = 0

    def _call(self, payload: dict) -> dict:
        """POST with bounded retries and exponential backoff with jitter.

        Raises the last transport error as RuntimeError after exhausting
        ``max_attempts``; callers translate it into their domain error.
        """
        last = "no attempt made"
        for attempt in range(self._config.max_attempts):
            self._limiter.acquire()
            self.calls += 1
            try:
                status, body = self._post(
                    self._config.endpoint,
                    payload,
                    self._config.headers(),
                    self._config.timeout_s,
                )
            except Exception as err:
                last = f"transport error: {err}"
            else:
                if status == 200:
                    return body
                last = f"HTTP {status}"
                if 400 <= status < 500:
                    break  # client errors do not heal on retry
            if attempt + 1 < self._config.max_attempts:
                delay = self._config.backoff_s * (2 ** attempt)
                self._sleep(delay * (1.0 + 0.1 * self._rng.random()))
        raise RuntimeError(f"{self._config.endpoint}: {last}")


def _encode_image(path: str) -> dict:
    with open(path, "rb") as fh:
        data = fh.read()
    return {"name": os.path.basename(path), "b64": base64.b64encode(data).decode("ascii")}


CONTINUITY_PROMPT = (
    "The first images are keyframes from the scene currently on screen; the "
    "last image is a new frame. Does the new frame belong to the same scene? "
    "Answer yes or no."
)


class RemoteVlmOracle(_RemoteClient):
    """HTTP continuity oracle: pool images plus candidate, yes/no answer.

    Wire contract: POST ``{"model", "prompt", "images": [{"name", "b64"},
    ...]}``; the response object carries the reply text under ``"answer"``
    and is parsed case-insensitively for a leading yes/no token.
    """

    def same_scene(self, pool: Sequence[KeyframeRef], candidate: KeyframeRef) -> bool:
        images = [_encode_image(f.image_ref) for f in pool if f.image_ref]
        if candidate.image_ref:
            images.append(_encode_image(candidate.image_ref))
        payload = {
            "model": self._config.model,
            "prompt": CONTINUITY_PROMPT,
            "images": images,
        }
        try:
            body = self._call(payload)
        except RuntimeError as err:
            raise OracleUnavailable(str(err)) from err
        answer = str(body.get("answer", "")).strip().lower()
        if answer.startswith("yes"):
            return True
        if answer.startswith("no"):
            return False
        raise OracleUnavailable(f"unparseable oracle answer {answer!r}")


class RemoteBackend(_RemoteClient):
    """HTTP annotation backend for attribution and expressiveness calls.

    Wire contract: POST ``{"model", "task", "prompt", "media": [...],
    "response_format": "json"}``; the raw structured reply comes back under
    ``"text"``. Schema validation stays with the caller.
    """

    def complete(self, request: RequestBundle) -> str:
        payload = {
            "model": self._config.model,
            "task": request.task,
            "prompt": request.prompt,
            "media": list(request.media_refs),
            "response_format": "json",
        }
        try:
            body = self._call(payload)
        except RuntimeError as err:
            raise SchemaViolation(f"backend unavailable: {err}") from err
        text = body.get("text")
        if not isinstance(text, str):
            raise SchemaViolation("backend reply missing 'text'")
        return text


SPLIT_PROMPT = (
    "The following subtitle lines form one continuous scene that runs too "
    "long. Propose the line positions after which the topic shifts, or an "
    "empty list if it reads as a single conversation.\n\n{lines}\n\n"
    'Reply with a single JSON object: {{"splits": [<position>, ...]}}'
)


class RemoteSemanticJudge(_RemoteClient):
    """Text-only judge proposing in-scene split points over a transcript."""

    def propose_splits(self, lines: Sequence[tuple[int, str]]) -> Sequence[int]:
        rendered = "\n".join(f"{pos}: {text}" for pos, text in lines)
        payload = {
            "model": self._config.model,
            "prompt": SPLIT_PROMPT.format(lines=rendered),
            "response_format": "json",
        }
        try:
            body = self._call(payload)
        except RuntimeError as err:
            raise JudgeUnavailable(str(err)) from err
        splits = body.get("splits")
        if splits is None and isinstance(body.get("text"), str):
            import json as _json

            try:
                splits = _json.loads(body["text"]).get("splits")
            except (ValueError, AttributeError) as err:
                raise JudgeUnavailable(f"unparseable judge reply: {err}") from err
        if not isinstance(splits, list) or not all(
            isinstance(p, int) and not isinstance(p, bool) for p in splits
        ):
            raise JudgeUnavailable(f"unparseable judge reply {body!r}")
        return splits
