from __future__ import annotations

import base64
import json
import logging
import re
import threading
import time
from dataclasses import dataclass, replace
from typing import Any, Callable, Dict, List, Optional, Protocol, Sequence, Tuple, Union

import httpx

from arena.errors import ApiError, GatewayError, GatewayTimeout, JsonOutputError, TransportError

logger = logging.getLogger(__name__)

PURPOSES = ("analysis", "decision", "evaluation", "reflection", "gossip")


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TextPart:
    text: str


@dataclass(frozen=True)
class ImagePart:
    path: str
    caption: str = ""


Part = Union[TextPart, ImagePart]


@dataclass(frozen=True)
class CompletionRequest:
    model: str
    system: str
    user_parts: Tuple[Part, ...]
    temperature: float = 0.7
    max_tokens: int = 1024
    seed: Optional[int] = None
    purpose: str = "analysis"
    agent_id: str = ""
    # number of repair rounds already spent on this request
    repair: int = 0

    def __post_init__(self):
        object.__setattr__(self, "user_parts", tuple(self.user_parts))
        if not self.user_parts:
            raise GatewayError("request needs at least one user part")

    @property
    def text(self) -> str:
        return "".join(p.text for p in self.user_parts if isinstance(p, TextPart))

    @property
    def images(self) -> List[ImagePart]:
        return [p for p in self.user_parts if isinstance(p, ImagePart)]


@dataclass(frozen=True)
class CompletionResult:
    raw_text: str
    parsed: Optional[Dict[str, Any]] = None
    attempts: int = 1
    latency_ms: float = 0.0


@dataclass(frozen=True)
class GatewayConfig:
    base_url: str = ""
    api_key: str = ""
    model: str = "gpt-4o"
    timeout: float = 120.0
    max_attempts: int = 3
    vision: bool = True
    backoff_base: float = 0.5
    backoff_max: float = 8.0

    @classmethod
    def from_env(cls, **overrides) -> "GatewayConfig":
        from config import Config

        values = dict(
            base_url=Config.LLM_BASE_URL,
            api_key=Config.LLM_API_KEY,
            model=Config.LLM_MODEL,
            timeout=Config.LLM_TIMEOUT,
            max_attempts=Config.LLM_MAX_ATTEMPTS,
            vision=Config.LLM_VISION,
        )
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


class Backend(Protocol):
    def send(self, req: CompletionRequest, cfg: GatewayConfig) -> str: ...


# ---------------------------------------------------------------------------
# HTTP (protocole compatible OpenAI)
# ---------------------------------------------------------------------------

def encode_image(path: str) -> str:
    with open(path, "rb") as f:
        return "data:image/png;base64," + base64.b64encode(f.read()).decode("ascii")


def build_payload(req: CompletionRequest) -> Dict[str, Any]:
    content: List[Dict[str, Any]] = []
    for part in req.user_parts:
        if isinstance(part, TextPart):
            content.append({"type": "text", "text": part.text})
        else:
            content.append({"type": "image_url", "image_url": {"url": encode_image(part.path)}})
    payload: Dict[str, Any] = {
        "model": req.model,
        "messages": [
            {"role": "system", "content": req.system},
            {"role": "user", "content": content},
        ],
        "temperature": req.temperature,
        "max_tokens": req.max_tokens,
    }
    if req.seed is not None:
        payload["seed"] = req.seed
    return payload


class HttpBackend:
    accepts_images = False

    def __init__(self, client: Optional[httpx.Client] = None, transport: Optional[httpx.BaseTransport] = None):
        self._client = client or httpx.Client(transport=transport)

    def send(self, req: CompletionRequest, cfg: GatewayConfig) -> str:
        if not cfg.base_url:
            raise GatewayError("ARENA_LLM_BASE_URL is not set")
        url = cfg.base_url.rstrip("/") + "/chat/completions"
        headers = {"Content-Type": "application/json"}
        if cfg.api_key:
            headers["Authorization"] = f"Bearer {cfg.api_key}"
        try:
            resp = self._client.post(url, headers=headers, json=build_payload(req), timeout=cfg.timeout)
        except httpx.TimeoutException as exc:
            raise GatewayTimeout(f"no answer within {cfg.timeout}s") from exc
        except httpx.TransportError as exc:
            raise TransportError(str(exc)) from exc

        if resp.status_code >= 400:
            raise ApiError(resp.status_code, resp.text[:200])
        try:
            return resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise ApiError(resp.status_code, "malformed completion body") from exc

    def close(self) -> None:
        self._client.close()


# ---------------------------------------------------------------------------
# Gateway : retries, trace
# ---------------------------------------------------------------------------

def _retriable(exc: GatewayError) -> bool:
    if isinstance(exc, (TransportError, GatewayTimeout)):
        return True
    if isinstance(exc, ApiError):
        return exc.status == 429 or exc.status >= 500
    return False


class LLMGateway:
    """Stateless front for one backend; safe to share between threads."""

    def __init__(
        self,
        cfg: GatewayConfig,
        backend: Backend,
        sleep: Callable[[float], None] = time.sleep,
        trace_path: Optional[str] = None,
    ):
        self.cfg = cfg
        self.backend = backend
        self._sleep = sleep
        self._trace_path = trace_path
        self._trace_lock = threading.Lock()

    def close(self) -> None:
        close = getattr(self.backend, "close", None)
        if close is not None:
            close()

    @property
    def accepts_images(self) -> bool:
        return self.cfg.vision or bool(getattr(self.backend, "accepts_images", False))

    def complete(self, req: CompletionRequest) -> CompletionResult:
        if req.images and not self.accepts_images:
            raise GatewayError(f"model {req.model!r} is not configured as vision-capable")

        attempts = 0
        started = time.perf_counter()
        while True:
            attempts += 1
            try:
                raw = self.backend.send(req, self.cfg)
                break
            except GatewayError as exc:
                if not _retriable(exc) or attempts >= self.cfg.max_attempts:
                    logger.warning(
                        "llm call failed agent=%s purpose=%s attempts=%d error=%s",
                        req.agent_id, req.purpose, attempts, exc,
                    )
                    self._trace(req, None, attempts, error=str(exc))
                    raise
                delay = min(self.cfg.backoff_max, self.cfg.backoff_base * 2 ** (attempts - 1))
                logger.info("llm retry agent=%s attempt=%d delay=%.2fs", req.agent_id, attempts, delay)
                self._sleep(delay)

        latency = (time.perf_counter() - started) * 1000.0
        self._trace(req, raw, attempts)
        return CompletionResult(raw_text=raw, attempts=attempts, latency_ms=latency)

    def _trace(self, req: CompletionRequest, raw: Optional[str], attempts: int, error: Optional[str] = None) -> None:
        if not self._trace_path:
            return
        record = {
            "agent_id": req.agent_id,
            "purpose": req.purpose,
            "repair": req.repair,
            "model": req.model,
            "system": req.system,
            "parts": [
                {"text": p.text} if isinstance(p, TextPart) else {"image": p.path, "caption": p.caption}
                for p in req.user_parts
            ],
            "attempts": attempts,
            "response": raw,
            "error": error,
        }
        line = json.dumps(record, ensure_ascii=False, sort_keys=True)
        with self._trace_lock:
            with open(self._trace_path, "a", encoding="utf-8") as f:
                f.write(line + "\n")


def complete(req: CompletionRequest, cfg: GatewayConfig, backend: Optional[Backend] = None) -> CompletionResult:
    if backend is not None:
        return LLMGateway(cfg, backend).complete(req)
    gateway = LLMGateway(cfg, HttpBackend())
    try:
        return gateway.complete(req)
    finally:
        gateway.close()


# ---------------------------------------------------------------------------
# Sortie JSON
# ---------------------------------------------------------------------------

_FENCE = re.compile(r"```(?:json|JSON)?[ \t]*\n?")


def parse_json_output(raw: str, required: Sequence[str] = ()) -> Dict[str, Any]:
    """First JSON object in ``raw`` carrying every ``required`` key."""
    text = _FENCE.sub("", raw or "")
    decoder = json.JSONDecoder(strict=False)
    seen_object = False
    pos = text.find("{")
    while pos != -1:
        try:
            obj, _ = decoder.raw_decode(text, pos)
        except json.JSONDecodeError:
            pos = text.find("{", pos + 1)
            continue
        if isinstance(obj, dict):
            seen_object = True
            if all(k in obj for k in required):
                return obj
        pos = text.find("{", pos + 1)
    if seen_object:
        raise JsonOutputError(f"JSON object lacks required keys {list(required)}")
    raise JsonOutputError("no JSON object found")


REPAIR_NOTE = (
    "\n\nYour previous reply could not be used ({error}). "
    "Reply again with only one JSON object containing the keys: {keys}."
)


def complete_json(
    gateway: LLMGateway,
    req: CompletionRequest,
    required: Sequence[str],
    max_repairs: int = 2,
) -> CompletionResult:
    """``gateway.complete`` plus up to ``max_repairs`` re-asks on unparseable output."""
    current = req
    total_attempts = 0
    while True:
        result = gateway.complete(current)
        total_attempts += result.attempts
        try:
            parsed = parse_json_output(result.raw_text, required)
            return replace(result, parsed=parsed, attempts=total_attempts)
        except JsonOutputError as exc:
            if current.repair >= max_repairs:
                logger.warning(
                    "json output unusable after repairs agent=%s purpose=%s", req.agent_id, req.purpose
                )
                raise
            note = REPAIR_NOTE.format(error=exc, keys=", ".join(required))
            current = replace(
                current,
                user_parts=tuple(req.user_parts) + (TextPart(note),),
                repair=current.repair + 1,
            )
