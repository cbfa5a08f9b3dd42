"""Model gateway: chat completion and text embedding behind one seam.

All model interactions in the package flow through a :class:`Gateway`,
so every other module can run offline against the deterministic mock
backends defined here. The HTTP backends document the wire mapping for
a real deployment and are not exercised by the test suite.
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Protocol

import numpy as np

from .domain import PromptBundle

DEFAULT_DIMENSION = 256
DEFAULT_SEED = 1234

_NORM_TOLERANCE = 1e-9


class GatewayError(Exception):
    """Base class for model backend failures."""


class BackendUnavailable(GatewayError):
    """The backend could not serve the request."""


class NoScriptedResponse(BackendUnavailable):
    """Mock only: the bundle digest has no scripted response (a fixture gap)."""

    def __init__(self, digest: str):
        super().__init__(f"no scripted response for bundle digest {digest}")
        self.digest = digest


class EmptyText(GatewayError):
    """Text to embed was empty after whitespace normalization."""


class Embedding:
    """A unit-norm real vector of fixed dimension.

    Vectors are L2-normalized at creation, so cosine similarity between
    two embeddings reduces to their dot product.
    """

    __slots__ = ("_values",)

    def __init__(self, values: np.ndarray | list[float]):
        arr = np.asarray(values, dtype=np.float64)
        if arr.ndim != 1:
            raise ValueError("embedding values must be a flat vector")
        if not np.all(np.isfinite(arr)):
            raise ValueError("embedding values must be finite")
        norm = float(np.linalg.norm(arr))
        if abs(norm - 1.0) > _NORM_TOLERANCE:
            raise ValueError(f"embedding must be unit-norm, got norm {norm}")
        arr = arr.copy()
        arr.setflags(write=False)
        self._values = arr

    @classmethod
    def normalize(cls, values: np.ndarray | list[float]) -> "Embedding":
        """Build an embedding by L2-normalizing an arbitrary nonzero vector."""
        arr = np.asarray(values, dtype=np.float64)
        norm = float(np.linalg.norm(arr))
        if norm == 0.0:
            raise ValueError("cannot normalize a zero vector")
        return cls(arr / norm)

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def dimension(self) -> int:
        return int(self._values.shape[0])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Embedding):
            return NotImplemented
        return bool(np.array_equal(self._values, other._values))

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"Embedding(dim={self.dimension})"


@dataclass(frozen=True)
class CompletionRequest:
    """A prompt bundle plus sampling and transport-retry settings."""

    bundle: PromptBundle
    temperature: float = 0.0
    max_retries: int = 0

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if not 0 <= self.max_retries <= 5:
            raise ValueError("max_retries must be in [0, 5]")


class ChatBackend(Protocol):
    def complete(self, request: CompletionRequest) -> str: ...


class EmbeddingBackend(Protocol):
    @property
    def dimension(self) -> int: ...

    def embed(self, text: str) -> Embedding: ...


def bundle_digest(bundle: PromptBundle) -> str:
    """Stable hex digest of a bundle; equal bundles share a digest."""
    payload = json.dumps(
        {
            "system": bundle.system,
            "user": bundle.user,
            "exemplars": [[e.input, e.output] for e in bundle.exemplars],
        },
        sort_keys=True,
        ensure_ascii=False,
        separators=(",", ":"),
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class ScriptedChatBackend:
    """Offline chat backend keyed by bundle digest.

    Responses are registered per bundle (or per digest), so identical
    bundles always produce identical text. An optional ``default``
    responder covers unscripted bundles; without one, an unscripted
    bundle raises :class:`NoScriptedResponse` to flag the fixture gap.
    The default must be a pure function of the bundle to preserve the
    determinism contract.
    """

    def __init__(self, default: Callable[[PromptBundle], str] | None = None):
        self._scripts: dict[str, str] = {}
        self._default = default
        self._lock = threading.Lock()
        self._calls: list[PromptBundle] = []

    def script(self, bundle: PromptBundle, response: str) -> str:
        """Register a response for this exact bundle; returns its digest."""
        digest = bundle_digest(bundle)
        self._scripts[digest] = response
        return digest

    def script_digest(self, digest: str, response: str) -> None:
        self._scripts[digest] = response

    def complete(self, request: CompletionRequest) -> str:
        digest = bundle_digest(request.bundle)
        with self._lock:
            self._calls.append(request.bundle)
        response = self._scripts.get(digest)
        if response is not None:
            return response
        if self._default is not None:
            return self._default(request.bundle)
        raise NoScriptedResponse(digest)

    @property
    def calls(self) -> list[PromptBundle]:
        """Bundles seen so far, in call order (copy)."""
        with self._lock:
            return list(self._calls)


def digest_responder(prefix: str = "answer") -> Callable[[PromptBundle], str]:
    """A pure default responder: deterministic text derived from the digest."""

    def respond(bundle: PromptBundle) -> str:
        return f"{prefix}:{bundle_digest(bundle)[:16]}"

    return respond


@lru_cache(maxsize=131072)
def _token_vector(seed: int, dimension: int, token: str) -> np.ndarray:
    # Stable across processes: the RNG seed comes from a keyed blake2 digest,
    # never from Python's randomized str hash.
    digest = hashlib.blake2b(
        token.encode("utf-8"), digest_size=8, key=str(seed).encode("utf-8")
    ).digest()
    rng = np.random.default_rng(int.from_bytes(digest, "big"))
    vec = rng.standard_normal(dimension)
    vec.setflags(write=False)
    return vec


class HashEmbeddingBackend:
    """Seeded token-hash bag-of-words embedder.

    Lowercases and splits on whitespace, maps each token through a
    seeded hash to a pseudo-random vector, sums and L2-normalizes.
    Deterministic, order-insensitive, and cheap, while still giving
    token-overlap similarity structure that behaves plausibly in tests.
    """

    def __init__(self, dimension: int = DEFAULT_DIMENSION, seed: int = DEFAULT_SEED):
        if dimension < 1:
            raise ValueError("dimension must be positive")
        self._dimension = dimension
        self._seed = seed
        self._lock = threading.Lock()
        self._calls: list[str] = []

    @property
    def dimension(self) -> int:
        return self._dimension

    @property
    def seed(self) -> int:
        return self._seed

    def embed(self, text: str) -> Embedding:
        tokens = text.lower().split()
        if not tokens:
            raise EmptyText("cannot embed empty text")
        with self._lock:
            self._calls.append(text)
        total = np.zeros(self._dimension, dtype=np.float64)
        for token in tokens:
            total += _token_vector(self._seed, self._dimension, token)
        norm = float(np.linalg.norm(total))
        if norm == 0.0:  # unreachable for continuous token vectors
            raise GatewayError("degenerate embedding: token vectors cancelled")
        return Embedding(total / norm)

    @property
    def calls(self) -> list[str]:
        """Texts embedded so far, in call order (copy)."""
        with self._lock:
            return list(self._calls)


class HttpChatBackend:
    """Chat over HTTP for a real deployment.

    Wire mapping: ``POST {endpoint}/v1/chat/completions`` with body
    ``{"messages": [{"role": "system"|"user"|"assistant", "content": str}, ...],
    "temperature": float}``; exemplars become alternating user/assistant
    messages between the system and final user message. The response body
    must carry the completion under ``{"text": str}``. Transport errors and
    non-2xx responses surface as :class:`BackendUnavailable`, retried up
    to ``request.max_retries`` times.
    """

    def __init__(self, endpoint: str, timeout: float = 30.0):
        self._endpoint = endpoint.rstrip("/")
        self._timeout = timeout

    def complete(self, request: CompletionRequest) -> str:
        import httpx

        messages = [{"role": "system", "content": request.bundle.system}]
        for exemplar in request.bundle.exemplars:
            messages.append({"role": "user", "content": exemplar.input})
            messages.append({"role": "assistant", "content": exemplar.output})
        messages.append({"role": "user", "content": request.bundle.user})
        body = {"messages": messages, "temperature": request.temperature}

        last_error: Exception | None = None
        for _ in range(request.max_retries + 1):
            try:
                response = httpx.post(
                    f"{self._endpoint}/v1/chat/completions", json=body, timeout=self._timeout
                )
                response.raise_for_status()
                return str(response.json()["text"])
            except Exception as exc:  # noqa: BLE001 - everything maps to unavailable
                last_error = exc
        raise BackendUnavailable(f"chat backend failed: {last_error}") from last_error


class HttpEmbeddingBackend:
    """Embeddings over HTTP for a real deployment.

    Wire mapping: ``POST {endpoint}/v1/embeddings`` with body
    ``{"input": str}``; the response must carry ``{"values": [float, ...]}``
    of the configured dimension. Vectors are re-normalized on receipt so
    the unit-norm invariant holds regardless of provider behavior.
    """

    def __init__(self, endpoint: str, dimension: int = DEFAULT_DIMENSION, timeout: float = 30.0):
        self._endpoint = endpoint.rstrip("/")
        self._dimension = dimension
        self._timeout = timeout

    @property
    def dimension(self) -> int:
        return self._dimension

    def embed(self, text: str) -> Embedding:
        import httpx

        if not text.split():
            raise EmptyText("cannot embed empty text")
        try:
            response = httpx.post(
                f"{self._endpoint}/v1/embeddings", json={"input": text}, timeout=self._timeout
            )
            response.raise_for_status()
            values = response.json()["values"]
        except Exception as exc:  # noqa: BLE001
            raise BackendUnavailable(f"embedding backend failed: {exc}") from exc
        if len(values) != self._dimension:
            raise BackendUnavailable(
                f"embedding backend returned dimension {len(values)}, expected {self._dimension}"
            )
        return Embedding.normalize(np.asarray(values, dtype=np.float64))


class Gateway:
    """Single entry point for completions and embeddings."""

    def __init__(self, chat: ChatBackend, embedder: EmbeddingBackend):
        self.chat = chat
        self.embedder = embedder

    def complete(self, request: CompletionRequest) -> str:
        return self.chat.complete(request)

    def embed(self, text: str) -> Embedding:
        return self.embedder.embed(text)

    @property
    def dimension(self) -> int:
        return self.embedder.dimension

    @classmethod
    def mock(
        cls,
        dimension: int = DEFAULT_DIMENSION,
        seed: int = DEFAULT_SEED,
        default_response: Callable[[PromptBundle], str] | None = None,
    ) -> "Gateway":
        """A fully offline gateway: scripted chat plus hash embeddings."""
        return cls(
            chat=ScriptedChatBackend(default=default_response),
            embedder=HashEmbeddingBackend(dimension=dimension, seed=seed),
        )
