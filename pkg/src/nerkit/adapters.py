"""Client for external NER model servers speaking the annotate wire protocol.

    POST {endpoint}/annotate  {"model": str, "text": str}
        -> 200 {"entities": [{"surface", "label", "start", "end", "score"?}]}
    GET  {endpoint}/models    -> 200 {"models": [str]}
    4xx  {"error": str}; 5xx is retryable
"""

from __future__ import annotations

import logging
import threading
import time
from dataclasses import dataclass
from typing import Callable, Optional

import httpx

from .categories import normalize_category
from .errors import NerkitError, ProtocolError, RemoteError, TransportError, UnknownLabel
from .model import ContextPolicy, EntityMention, ModelDescriptor
from .results import ModelRunResult
from .textkit import ContextExtractor, split_sentences

log = logging.getLogger(__name__)

MAX_TEXT = 1_000_000
BACKOFF_BASE = 0.25
BACKOFF_FACTOR = 2.0
DEFAULT_INFLIGHT = 4


@dataclass(frozen=True)
class AnnotateRequest:
    model: str
    text: str
    max_chars: int = MAX_TEXT

    def __post_init__(self):
        if len(self.text) > self.max_chars:
            raise ValueError(f"text of {len(self.text)} chars exceeds limit {self.max_chars}")


@dataclass(frozen=True)
class RemoteEntity:
    surface: str
    label: str
    start: int
    end: int
    score: Optional[float] = None


@dataclass(frozen=True)
class AnnotateResponse:
    entities: tuple
    attempts: int = 1


def backoff_delays(retries: int, base: float = BACKOFF_BASE, factor: float = BACKOFF_FACTOR) -> list:
    """Sleep before each retry: base, base*factor, base*factor**2, ..."""
    return [base * factor ** k for k in range(retries)]


_slots_lock = threading.Lock()
_slots: dict = {}


def _endpoint_slot(endpoint: str, limit: int = DEFAULT_INFLIGHT) -> threading.BoundedSemaphore:
    with _slots_lock:
        sem = _slots.get(endpoint)
        if sem is None:
            sem = _slots[endpoint] = threading.BoundedSemaphore(limit)
        return sem


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def parse_annotate_body(body, text: str) -> tuple:
    """Validate a response body; any non-conforming part rejects it whole."""
    if not isinstance(body, dict) or not isinstance(body.get("entities"), list):
        raise ProtocolError("response must be an object with an 'entities' list")
    out = []
    for i, e in enumerate(body["entities"]):
        if not isinstance(e, dict):
            raise ProtocolError(f"entity {i} is not an object")
        surface, label, start, end = e.get("surface"), e.get("label"), e.get("start"), e.get("end")
        if not isinstance(surface, str) or not isinstance(label, str) or not label.strip():
            raise ProtocolError(f"entity {i}: surface/label must be non-empty strings")
        if not (_is_int(start) and _is_int(end)):
            raise ProtocolError(f"entity {i}: start/end must be integers")
        if not 0 <= start < end <= len(text):
            raise ProtocolError(f"entity {i}: span ({start}, {end}) outside text")
        score = e.get("score")
        if score is not None:
            if not isinstance(score, (int, float)) or isinstance(score, bool) or not 0 <= score <= 1:
                raise ProtocolError(f"entity {i}: score must be a number in [0, 1]")
            score = float(score)
        out.append(RemoteEntity(surface, label, start, end, score))
    return tuple(out)


def _error_message(resp: httpx.Response) -> str:
    try:
        body = resp.json()
        if isinstance(body, dict) and "error" in body:
            return str(body["error"])
    except ValueError:
        pass
    return resp.text[:200] or f"HTTP {resp.status_code}"


def http_annotate(endpoint: str, req: AnnotateRequest, timeout: float = 30.0, retries: int = 3,
                  *, transport=None, sleep: Optional[Callable[[float], None]] = None,
                  token: Optional[str] = None) -> AnnotateResponse:
    """POST one annotate request, retrying timeouts, connection errors and 5xx."""
    if not endpoint.startswith(("http://", "https://")):
        raise ValueError(f"malformed endpoint {endpoint!r}")
    sleep = sleep or time.sleep
    url = endpoint.rstrip("/") + "/annotate"
    headers = {"Authorization": f"Bearer {token}"} if token else {}
    delays = backoff_delays(retries)
    last = None
    with _endpoint_slot(endpoint), httpx.Client(timeout=timeout, transport=transport) as client:
        for attempt in range(1, retries + 2):
            log.info("annotate attempt %d/%d %s model=%s", attempt, retries + 1, url, req.model)
            try:
                resp = client.post(url, json={"model": req.model, "text": req.text}, headers=headers)
            except httpx.HTTPError as exc:
                last = f"{type(exc).__name__}: {exc}"
            else:
                if resp.status_code < 400:
                    try:
                        body = resp.json()
                    except ValueError as exc:
                        raise ProtocolError(f"non-JSON body from {url}") from exc
                    return AnnotateResponse(parse_annotate_body(body, req.text), attempt)
                if resp.status_code < 500:
                    raise RemoteError(_error_message(resp), resp.status_code)
                last = f"HTTP {resp.status_code}"
            if attempt <= retries:
                delay = delays[attempt - 1]
                log.info("annotate attempt %d failed (%s); retrying in %.3fs", attempt, last, delay)
                sleep(delay)
    err = TransportError(f"{url}: giving up after {retries + 1} attempts ({last})")
    err.attempts = retries + 1
    raise err


def list_remote_models(endpoint: str, timeout: float = 30.0, *, transport=None) -> list:
    url = endpoint.rstrip("/") + "/models"
    try:
        with httpx.Client(timeout=timeout, transport=transport) as client:
            resp = client.get(url)
    except httpx.HTTPError as exc:
        raise TransportError(f"{url}: {exc}") from exc
    if resp.status_code >= 500:
        raise TransportError(f"{url}: HTTP {resp.status_code}")
    if resp.status_code >= 400:
        raise RemoteError(_error_message(resp), resp.status_code)
    try:
        body = resp.json()
    except ValueError as exc:
        raise ProtocolError(f"non-JSON body from {url}") from exc
    models = body.get("models") if isinstance(body, dict) else None
    if not isinstance(models, list) or not all(isinstance(m, str) for m in models):
        raise ProtocolError("expected {'models': [str, ...]}")
    return sorted(models)


def chunk_text(text: str, max_chars: int = MAX_TEXT) -> list:
    """Split into ``(offset, piece)`` chunks of at most ``max_chars``, on sentence boundaries
    where possible (an over-long sentence is cut hard)."""
    if len(text) <= max_chars:
        return [(0, text)]
    chunks = []
    cur_start = 0
    cur_end = 0
    for s in split_sentences(text):
        if s.end - cur_start <= max_chars:
            cur_end = s.end
            continue
        if cur_end > cur_start:
            chunks.append((cur_start, text[cur_start:cur_end]))
            cur_start = cur_end
        while s.end - cur_start > max_chars:
            chunks.append((cur_start, text[cur_start:cur_start + max_chars]))
            cur_start += max_chars
        cur_end = s.end
    while len(text) - cur_start > max_chars:
        chunks.append((cur_start, text[cur_start:cur_start + max_chars]))
        cur_start += max_chars
    if cur_start < len(text):
        chunks.append((cur_start, text[cur_start:]))
    return [(o, c) for o, c in chunks if c]


def run_external_backend(desc: ModelDescriptor, doc, *, strict_labels: bool = False,
                         policy: Optional[ContextPolicy] = None,
                         context: Optional[ContextExtractor] = None,
                         timeout: float = 30.0, retries: int = 3, transport=None,
                         sleep=None, token=None, max_chars: int = MAX_TEXT) -> ModelRunResult:
    """Annotate ``doc`` with a remote model; failures come back as an error result."""
    if desc.kind != "external" or not desc.endpoint:
        raise ValueError(f"{desc.model_id} is not an external model")
    t0 = time.perf_counter()
    text = doc.text
    context = context or ContextExtractor(text, policy)
    entities = []
    dropped = 0
    attempts = 0
    try:
        for offset, piece in chunk_text(text, max_chars):
            resp = http_annotate(desc.endpoint, AnnotateRequest(desc.remote_name, piece, max_chars),
                                 timeout, retries, transport=transport, sleep=sleep, token=token)
            attempts += resp.attempts
            for e in resp.entities:
                start, end = e.start + offset, e.end + offset
                if text[start:end] != e.surface:
                    dropped += 1
                    log.warning("%s: dropping span (%d, %d) %r: text there is %r",
                                desc.model_id, start, end, e.surface, text[start:end])
                    continue
                cat = normalize_category(e.label, desc.alias_map, strict=strict_labels)
                entities.append(EntityMention(e.surface, cat, start, end, context(start, end),
                                              desc.model_id, e.score))
    except (NerkitError, UnknownLabel) as exc:
        attempts += getattr(exc, "attempts", 0)
        return ModelRunResult(desc.model_id, time.perf_counter() - t0, (),
                              f"{type(exc).__name__}: {exc}", dropped, attempts)
    return ModelRunResult(desc.model_id, time.perf_counter() - t0, tuple(entities), None, dropped, attempts)
