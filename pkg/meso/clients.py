"""Completion clients and embedders.

Two small interfaces sit between the pipelines and whatever model backs them:

- ``CompletionClient``: ``complete(prompt) -> str`` plus a ``model_id``
- ``Embedder``: ``embed(text) -> numpy vector`` plus an ``embedder_id``

Implementations:

- ``MockCompletionClient`` replays canned responses keyed by the SHA-256 of
  the prompt. ``HashEmbedder`` derives vectors from token hashes. Both are
  deterministic and used by the test-suite.
- ``HttpCompletionClient`` / ``HttpEmbedder`` talk to OpenAI-compatible
  ``/v1/chat/completions`` and ``/v1/embeddings`` endpoints via urllib3.
- ``BedrockCompletionClient`` / ``BedrockEmbedder`` call AWS Bedrock
  (``converse`` and the Titan text-embedding model) via boto3.

All clients are safe to call from several worker threads at once.

Security note: tokens are read from the environment variable named in the
config (see ``meso.config``), never from the config file itself, and are
never logged. Prefer IAM roles over static AWS keys for the Bedrock clients.
"""

from __future__ import annotations

import hashlib
import logging
import threading
from collections.abc import Mapping, Sequence
from functools import lru_cache
from pathlib import Path
from typing import Any, Optional, Protocol, Union

import boto3
import numpy as np
import orjson
import urllib3
from botocore.exceptions import BotoCoreError, ClientError

from .config import Settings
from .errors import CompletionTransportError, EmbeddingError, MesoError
from .store import read_text
from .text import tokenize

logger = logging.getLogger(__name__)

HASH_DIMENSION = 256
TITAN_EMBED_MODEL = "amazon.titan-embed-text-v2:0"


class CompletionClient(Protocol):
    model_id: str

    def complete(self, prompt: str) -> str: ...


class Embedder(Protocol):
    embedder_id: str

    def embed(self, text: str) -> np.ndarray: ...


def prompt_hash(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


# ---------- mock ----------
class MockCompletionClient:
    """Replays canned responses keyed by prompt hash.

    Each key maps to a sequence of raw outputs returned on successive calls
    with that prompt; the last one repeats once the sequence runs out. An
    unknown prompt is a transport failure.
    """

    def __init__(self, responses: Mapping[str, Sequence[str]], model_id: str = "mock") -> None:
        self.model_id = model_id
        self._responses = {key: list(values) for key, values in responses.items()}
        self._calls: dict[str, int] = {}
        self._lock = threading.Lock()

    def complete(self, prompt: str) -> str:
        key = prompt_hash(prompt)
        canned = self._responses.get(key)
        if not canned:
            raise CompletionTransportError(f"no canned response for prompt {key[:12]}")
        with self._lock:
            call = self._calls.get(key, 0)
            self._calls[key] = call + 1
        logger.debug("mock completion %s call %d", key[:12], call + 1)
        return canned[min(call, len(canned) - 1)]


def read_canned_responses(path: Union[str, Path]) -> dict[str, list[str]]:
    """Parse a ``responses.jsonl`` fixture into ``{post_id: [raw, ...]}``.

    Each line is ``{"post_id": str, "responses": [...]}``. A string entry is
    replayed verbatim (so malformed output can be staged); any other JSON
    value is serialized with orjson first.
    """
    text = read_text(path)
    canned: dict[str, list[str]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            entry = orjson.loads(line)
            post_id = entry["post_id"]
            raws = [value if isinstance(value, str) else orjson.dumps(value).decode() for value in entry["responses"]]
        except (orjson.JSONDecodeError, KeyError, TypeError) as exc:
            raise MesoError(f"{path}:{lineno}: bad canned response line ({exc})") from exc
        if not raws:
            raise MesoError(f"{path}:{lineno}: no responses for {post_id!r}")
        canned[post_id] = raws
    return canned


@lru_cache(maxsize=65536)
def _token_pattern(token: str, dimension: int) -> np.ndarray:
    digest = hashlib.shake_256(token.encode("utf-8")).digest((dimension + 7) // 8)
    bits = np.unpackbits(np.frombuffer(digest, dtype=np.uint8))[:dimension]
    pattern = bits.astype(np.float64) * 2.0 - 1.0
    pattern.flags.writeable = False
    return pattern


class HashEmbedder:
    """Deterministic bag-of-tokens embedder.

    Every token is hashed with SHAKE-256 to a ``±1`` pattern of length
    ``dimension``; a text's vector is the sum of its token patterns scaled to
    unit length. A text without tokens embeds to the zero vector.
    """

    def __init__(self, dimension: int = HASH_DIMENSION) -> None:
        if dimension < 2:
            raise ValueError("dimension must be at least 2")
        self.dimension = dimension
        self.embedder_id = f"hash-{dimension}"

    def embed(self, text: str) -> np.ndarray:
        vector = np.zeros(self.dimension, dtype=np.float64)
        for token in tokenize(text):
            vector += _token_pattern(token, self.dimension)
        norm = np.linalg.norm(vector)
        return vector / norm if norm else vector


# ---------- http ----------
class _JsonEndpoint:
    def __init__(self, endpoint: str, token: Optional[str], timeout: float, error: type[MesoError]) -> None:
        self.endpoint = endpoint
        self._error = error
        self._headers = {"Content-Type": "application/json"}
        if token:
            self._headers["Authorization"] = f"Bearer {token}"
        self._http = urllib3.PoolManager(timeout=urllib3.Timeout(total=timeout), retries=False)

    def post(self, payload: dict[str, Any]) -> Any:
        try:
            response = self._http.request("POST", self.endpoint, body=orjson.dumps(payload), headers=self._headers)
        except urllib3.exceptions.HTTPError as exc:
            raise self._error(f"request to {self.endpoint} failed: {exc}") from exc
        if response.status >= 400:
            raise self._error(f"{self.endpoint} returned HTTP {response.status}")
        try:
            return orjson.loads(response.data)
        except orjson.JSONDecodeError as exc:
            raise self._error(f"{self.endpoint} returned a non-JSON body") from exc


class HttpCompletionClient:
    """OpenAI-compatible chat-completions client, temperature 0."""

    def __init__(self, endpoint: str, model: str, token: Optional[str] = None, timeout: float = 60.0) -> None:
        self.model_id = model
        self._endpoint = _JsonEndpoint(endpoint, token, timeout, CompletionTransportError)

    def complete(self, prompt: str) -> str:
        body = self._endpoint.post(
            {
                "model": self.model_id,
                "messages": [{"role": "user", "content": prompt}],
                "temperature": 0,
            }
        )
        try:
            return body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise CompletionTransportError("completion response has no choices[0].message.content") from exc


class HttpEmbedder:
    def __init__(self, endpoint: str, model: str, token: Optional[str] = None, timeout: float = 30.0) -> None:
        self.embedder_id = model
        self._endpoint = _JsonEndpoint(endpoint, token, timeout, EmbeddingError)

    def embed(self, text: str) -> np.ndarray:
        body = self._endpoint.post({"model": self.embedder_id, "input": text})
        try:
            return np.asarray(body["data"][0]["embedding"], dtype=np.float64)
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise EmbeddingError("embedding response has no data[0].embedding vector") from exc


# ---------- bedrock ----------
class BedrockCompletionClient:
    """AWS Bedrock ``converse`` client; credentials come from the boto3 chain."""

    def __init__(self, model: str, region: str) -> None:
        self.model_id = model
        self._runtime = boto3.client("bedrock-runtime", region_name=region)

    def complete(self, prompt: str) -> str:
        try:
            response = self._runtime.converse(
                modelId=self.model_id,
                messages=[{"role": "user", "content": [{"text": prompt}]}],
                inferenceConfig={"temperature": 0.0},
            )
            return response["output"]["message"]["content"][0]["text"]
        except (BotoCoreError, ClientError) as exc:
            raise CompletionTransportError(f"bedrock converse failed: {exc}") from exc
        except (KeyError, IndexError) as exc:
            raise CompletionTransportError("bedrock response has no output text") from exc


class BedrockEmbedder:
    def __init__(self, region: str, model: str = TITAN_EMBED_MODEL) -> None:
        self.embedder_id = model
        self._runtime = boto3.client("bedrock-runtime", region_name=region)

    def embed(self, text: str) -> np.ndarray:
        try:
            response = self._runtime.invoke_model(
                modelId=self.embedder_id,
                body=orjson.dumps({"inputText": text}),
                contentType="application/json",
                accept="application/json",
            )
            body = orjson.loads(response["body"].read())
            return np.asarray(body["embedding"], dtype=np.float64)
        except (BotoCoreError, ClientError) as exc:
            raise EmbeddingError(f"bedrock invoke_model failed: {exc}") from exc
        except (KeyError, TypeError, ValueError) as exc:
            raise EmbeddingError("bedrock response has no embedding") from exc


# ---------- factories ----------
def build_completion_client(kind: str, settings: Settings) -> CompletionClient:
    """Build an ``http`` or ``bedrock`` client; mock clients need fixtures and
    are built by ``meso.extraction.mock_client_from_fixtures``."""
    if kind == "http":
        return HttpCompletionClient(
            settings.llm_endpoint, settings.llm_model, settings.token("llm"), settings.llm_timeout
        )
    if kind == "bedrock":
        return BedrockCompletionClient(settings.llm_model, settings.aws_region)
    raise MesoError(f"unknown completion client {kind!r}")


def build_embedder(kind: str, settings: Settings) -> Embedder:
    if kind == "mock":
        return HashEmbedder()
    if kind == "http":
        return HttpEmbedder(
            settings.embedding_endpoint,
            settings.embedding_model,
            settings.token("embedding"),
            settings.embedding_timeout,
        )
    if kind == "bedrock":
        return BedrockEmbedder(settings.aws_region)
    raise MesoError(f"unknown embedder {kind!r}")
