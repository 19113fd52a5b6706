"""Model backends: HTTP chat-completions/embeddings, cassette record/replay,
and a deterministic hashing embedder used when no embedding model is wired.

Every model call in the toolkit goes through a Backend's send(). The
cassette backend makes all of them replayable offline: a request digest
(prompts, model tag, image digests; temperature and token limits excluded)
keys a JSONL log of responses.
"""

from __future__ import annotations

import base64
import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

import httpx
import numpy as np

from .errors import DiveError

REQUEST_KINDS = ("text", "vision", "embed")


class GatewayError(DiveError):
    pass


class Timeout(GatewayError):
    pass


class HttpStatus(GatewayError):
    def __init__(self, code: int, detail: str = ""):
        super().__init__(f"HTTP {code}: {detail}" if detail else f"HTTP {code}")
        self.code = code


class RateLimited(GatewayError):
    pass


class MalformedResponse(GatewayError):
    pass


class CassetteMiss(GatewayError):
    def __init__(self, digest: str):
        super().__init__(f"cassette has no entry for digest {digest}")
        self.digest = digest


@dataclass
class ModelRequest:
    kind: str
    model_tag: str
    user_prompt: str
    system_prompt: str = ""
    images: list[bytes] = field(default_factory=list)
    max_tokens: int = 4096
    temperature: float = 0.0

    def __post_init__(self):
        if self.kind not in REQUEST_KINDS:
            raise ValueError(f"bad request kind {self.kind!r}")
        if (self.kind == "vision") != bool(self.images):
            raise ValueError("images are required for vision requests and only for them")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")


@dataclass
class ModelResponse:
    token_usage: int = 0
    backend_tag: str = ""
    text: str | None = None
    vector: list[float] | None = None

    def __post_init__(self):
        if (self.text is None) == (self.vector is None):
            raise ValueError("exactly one of text/vector must be set")

    def to_dict(self) -> dict:
        return {
            "text": self.text,
            "vector": self.vector,
            "token_usage": self.token_usage,
            "backend_tag": self.backend_tag,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelResponse":
        return cls(
            text=d.get("text"),
            vector=d.get("vector"),
            token_usage=int(d.get("token_usage") or 0),
            backend_tag=str(d.get("backend_tag") or ""),
        )


def request_digest(req: ModelRequest) -> str:
    """Stable request identity: prompts, kind, model tag, image digests.
    Temperature and max_tokens are excluded so one recording serves sweeps."""
    payload = {
        "kind": req.kind,
        "model": req.model_tag,
        "system": req.system_prompt,
        "user": req.user_prompt,
        "images": [hashlib.sha256(img).hexdigest() for img in req.images],
    }
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


@dataclass
class GatewayConfig:
    api_base: str = ""
    api_key: str = ""
    model_text: str = "text-default"
    model_vision: str = "vision-default"
    model_embed: str = "embed-default"

    def model_for(self, kind: str) -> str:
        return {"text": self.model_text, "vision": self.model_vision, "embed": self.model_embed}[kind]


def load_config(path=None) -> GatewayConfig:
    """Config file first (JSON), env vars override."""
    cfg = GatewayConfig()
    if path:
        data = json.loads(Path(path).read_text("utf-8"))
        for key in ("api_base", "api_key", "model_text", "model_vision", "model_embed"):
            if key in data:
                setattr(cfg, key, str(data[key]))
    env_map = {
        "DIVE_API_BASE": "api_base",
        "DIVE_API_KEY": "api_key",
        "DIVE_MODEL_TEXT": "model_text",
        "DIVE_MODEL_VISION": "model_vision",
        "DIVE_MODEL_EMBED": "model_embed",
    }
    for env, attr in env_map.items():
        value = os.environ.get(env)
        if value:
            setattr(cfg, attr, value)
    return cfg


def _image_data_url(data: bytes) -> str:
    mime = "image/png" if data.startswith(b"\x89PNG") else "image/jpeg"
    return f"data:{mime};base64,{base64.b64encode(data).decode('ascii')}"


class HttpBackend:
    """Chat-completions-style HTTP backend with bounded retry."""

    MAX_ATTEMPTS = 5

    def __init__(self, config: GatewayConfig, timeout: float = 120.0, sleep=time.sleep):
        if not config.api_base:
            raise GatewayError("no API base configured (DIVE_API_BASE)")
        self.config = config
        self.tag = f"http:{config.api_base}"
        self._sleep = sleep
        self._client = httpx.Client(
            base_url=config.api_base.rstrip("/"),
            timeout=timeout,
            headers={"Authorization": f"Bearer {config.api_key}"} if config.api_key else {},
        )

    def close(self):
        self._client.close()

    def send(self, req: ModelRequest) -> ModelResponse:
        if req.kind == "embed":
            payload = {"model": req.model_tag, "input": [req.user_prompt]}
            url = "/embeddings"
        else:
            if req.images:
                content: object = [{"type": "text", "text": req.user_prompt}]
                for img in req.images:
                    content.append({"type": "image_url", "image_url": {"url": _image_data_url(img)}})
            else:
                content = req.user_prompt
            messages = []
            if req.system_prompt:
                messages.append({"role": "system", "content": req.system_prompt})
            messages.append({"role": "user", "content": content})
            payload = {
                "model": req.model_tag,
                "messages": messages,
                "max_tokens": req.max_tokens,
                "temperature": req.temperature,
            }
            url = "/chat/completions"

        body = self._post_with_retry(url, payload)
        try:
            usage = int(body.get("usage", {}).get("total_tokens") or 0)
            if req.kind == "embed":
                vector = [float(x) for x in body["data"][0]["embedding"]]
                return ModelResponse(vector=vector, token_usage=usage, backend_tag=self.tag)
            text = body["choices"][0]["message"]["content"]
            if not isinstance(text, str):
                raise KeyError("content")
            return ModelResponse(text=text, token_usage=usage, backend_tag=self.tag)
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise MalformedResponse(f"unexpected response shape: {exc}") from exc

    def _post_with_retry(self, url: str, payload: dict) -> dict:
        delay = 0.5
        last: Exception | None = None
        for attempt in range(self.MAX_ATTEMPTS):
            try:
                resp = self._client.post(url, json=payload)
            except httpx.TimeoutException as exc:
                raise Timeout(str(exc)) from exc
            except httpx.HTTPError as exc:
                raise GatewayError(f"transport failure: {exc}") from exc
            if resp.status_code == 429:
                last = RateLimited(f"429 after attempt {attempt + 1}")
                self._sleep(delay)
                delay = min(delay * 2, 8.0)
                continue
            if resp.status_code != 200:
                raise HttpStatus(resp.status_code, resp.text[:200])
            try:
                return resp.json()
            except json.JSONDecodeError as exc:
                raise MalformedResponse(f"response is not JSON: {exc}") from exc
        raise last if last is not None else GatewayError("retry loop exhausted")


class CassetteBackend:
    """Record/replay wrapper around another backend.

    replay: every send must hit the cassette; misses raise CassetteMiss.
    record: cassette hits replay; misses call the inner backend and append.
    passthrough: always call the inner backend, never touch the file.
    """

    def __init__(self, path, mode: str = "replay", inner=None):
        if mode not in ("replay", "record", "passthrough"):
            raise ValueError(f"bad cassette mode {mode!r}")
        if mode in ("record", "passthrough") and inner is None:
            raise ValueError(f"{mode} mode needs an inner backend")
        self.path = Path(path)
        self.mode = mode
        self.inner = inner
        self.tag = f"cassette:{self.path.name}"
        self._lock = threading.Lock()
        self._entries: dict[str, ModelResponse] = {}
        if self.path.exists():
            for line in self.path.read_text("utf-8").splitlines():
                line = line.strip()
                if not line:
                    continue
                entry = json.loads(line)
                self._entries[entry["digest"]] = ModelResponse.from_dict(entry["response"])

    def send(self, req: ModelRequest) -> ModelResponse:
        if self.mode == "passthrough":
            return self.inner.send(req)
        digest = request_digest(req)
        hit = self._entries.get(digest)
        if hit is not None:
            return hit
        if self.mode == "replay":
            raise CassetteMiss(digest)
        response = self.inner.send(req)
        entry = {
            "digest": digest,
            "request_summary": {
                "kind": req.kind,
                "model": req.model_tag,
                "system_chars": len(req.system_prompt),
                "user_preview": req.user_prompt[:200],
                "n_images": len(req.images),
            },
            "response": response.to_dict(),
        }
        with self._lock:
            if digest not in self._entries:
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(entry, ensure_ascii=False) + "\n")
                self._entries[digest] = response
        return self._entries[digest]


FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
EMBED_DIM = 256
_ALLOWED = set("abcdefghijklmnopqrstuvwxyz0123456789 .%()+-")


def fallback_embed(s: str) -> np.ndarray:
    """Deterministic 256-dim trigram hashing embedder.

    Lowercase, drop characters outside [a-z0-9 .%()+-], hash every
    character 3-gram with 64-bit FNV-1a into 256 buckets, L2-normalize the
    counts. Strings with no trigram embed to the zero vector.
    """
    cleaned = "".join(ch for ch in s.lower() if ch in _ALLOWED)
    counts = np.zeros(EMBED_DIM, dtype=np.float64)
    for i in range(len(cleaned) - 2):
        gram = cleaned[i:i + 3].encode("ascii")
        h = FNV_OFFSET
        for b in gram:
            h ^= b
            h = (h * FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
        counts[h % EMBED_DIM] += 1.0
    norm = float(np.linalg.norm(counts))
    if norm == 0.0:
        return counts
    return counts / norm


def embedder_from_backend(backend, model_tag: str):
    """Wrap a backend as a str -> vector callable for entry matching."""
    def embed(s: str) -> np.ndarray:
        resp = backend.send(ModelRequest(kind="embed", model_tag=model_tag, user_prompt=s))
        if resp.vector is None:
            raise MalformedResponse("embed request returned no vector")
        return np.asarray(resp.vector, dtype=np.float64)
    return embed


def backend_from_spec(spec: str, config: GatewayConfig | None = None):
    """CLI backend spec: 'cassette:<path>' replays, 'record:<path>' records
    over HTTP, 'http' talks to the configured endpoint directly."""
    if spec.startswith("cassette:"):
        return CassetteBackend(spec.split(":", 1)[1], mode="replay")
    if spec.startswith("record:"):
        cfg = config or load_config()
        return CassetteBackend(spec.split(":", 1)[1], mode="record", inner=HttpBackend(cfg))
    if spec == "http":
        return HttpBackend(config or load_config())
    raise ValueError(f"unrecognized backend spec {spec!r}")
