import hashlib
import json
import math
import threading
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any, Mapping, Optional, Sequence

from docteam.config import PriceEntry
from docteam.decision import CallStats
from docteam.query import Attachment

if TYPE_CHECKING:
    from docteam.backend.cache import ResponseCache
    from docteam.backend.session import SessionRecorder

CHARS_PER_TOKEN = 4


@dataclass(frozen=True)
class Message:
    """A chat message."""

    role: str
    """Either ``user`` or ``assistant``."""

    text: str
    attachment: Optional[Attachment] = None

    def __post_init__(self) -> None:
        if self.role not in ("user", "assistant"):
            raise ValueError(f"Message role must be user or assistant, got {self.role}")


@dataclass(frozen=True)
class ChatRequest:
    """A single request for a chat completion."""

    system: str
    messages: tuple[Message, ...]
    temperature: float = 0.0
    max_tokens: int = 512
    seed: Optional[int] = None
    tag: str = ""
    """The pipeline step that issued the request, e.g. ``"mdt.turn"``."""

    def __post_init__(self) -> None:
        object.__setattr__(self, "messages", tuple(self.messages))

        if not self.messages:
            raise ValueError("A chat request needs at least one message.")

        if not 0 <= self.temperature <= 2:
            raise ValueError(f"Temperature must be in [0, 2], got {self.temperature}.")

    @property
    def prompt_chars(self) -> int:
        return len(self.system) + sum(len(message.text) for message in self.messages)

    def text(self) -> str:
        """All text of the request, used for substring matching."""
        return "\n".join([self.system] + [message.text for message in self.messages])

    def request_hash(self, endpoint: str, model: str) -> str:
        """
        A stable hash of everything that influences the completion. The ``tag`` is
        left out, so that requests from different steps share cache entries.

        Args:
            endpoint: Identifies the endpoint (e.g. its base url).
            model: The model name.

        Returns:
            A hex digest.
        """

        payload = {
            "endpoint": endpoint,
            "model": model,
            "system": self.system,
            "messages": [
                [message.role, message.text, _attachment_key(message.attachment)]
                for message in self.messages
            ],
            "temperature": self.temperature,
            "seed": self.seed,
        }

        dump = json.dumps(payload, sort_keys=True, ensure_ascii=False)

        return hashlib.sha256(dump.encode("utf-8")).hexdigest()


def _attachment_key(attachment: Optional[Attachment]) -> Optional[str]:
    if isinstance(attachment, bytes):
        return "sha256:" + hashlib.sha256(attachment).hexdigest()

    return attachment


@dataclass(frozen=True)
class ChatResponse:
    """A chat completion."""

    text: str
    prompt_chars: int
    completion_chars: int
    from_cache: bool = False
    estimated_cost: float = 0.0
    """The estimated cost of this call, 0 when served from cache."""

    def __post_init__(self) -> None:
        if self.prompt_chars < 0 or self.completion_chars < 0:
            raise ValueError("Character counts cannot be negative.")


def estimate_cost(
    prompt_chars: int, completion_chars: int, price: Optional[PriceEntry]
) -> float:
    """
    Estimate the cost of a call, assuming four characters per token.

    Args:
        prompt_chars: The number of characters sent.
        completion_chars: The number of characters received.
        price: The price per 1000 tokens, or ``None`` if unknown.

    Returns:
        The estimated cost in USD.
    """

    if price is None:
        return 0.0

    prompt_tokens = math.ceil(prompt_chars / CHARS_PER_TOKEN)
    completion_tokens = math.ceil(completion_chars / CHARS_PER_TOKEN)

    return (
        prompt_tokens * price.prompt + completion_tokens * price.completion
    ) / 1000


class Backend(ABC):
    """
    Something that completes chat requests.

    Subclasses implement :meth:`_generate`. This class takes care of caching, of
    recording sessions, and of keeping the :class:`.CallStats`, which count only
    calls that were not served from cache.

    Args:
        model: The model name.
        prices: Price table, mapping model names to prices.
        cache: An optional response cache.
        max_concurrency: How many requests may be in flight at the same time.
    """

    endpoint_id = "backend"

    def __init__(
        self,
        model: str = "",
        prices: Optional[Mapping[str, PriceEntry]] = None,
        cache: Optional["ResponseCache"] = None,
        max_concurrency: int = 1,
    ) -> None:
        self.model = model
        self.prices = dict(prices or {})
        self.cache = cache
        self.recorder: Optional["SessionRecorder"] = None
        self.max_concurrency = max_concurrency

        self._stats = CallStats()
        self._lock = threading.Lock()

    @abstractmethod
    def _generate(self, request: ChatRequest) -> str:
        """
        Obtain the completion text for a request.

        Args:
            request: The request.

        Returns:
            The completion text.
        """

    def request_hash(self, request: ChatRequest) -> str:
        return request.request_hash(self.endpoint_id, self.model)

    def complete(self, request: ChatRequest) -> ChatResponse:
        """
        Complete a request.

        Args:
            request: The request.

        Returns:
            The response. Responses served from cache are marked as such, and are not
            counted in the stats.
        """

        key = self.request_hash(request)

        if self.cache is not None:
            cached = self.cache.get(key)

            if cached is not None:
                return self._record(
                    key,
                    request,
                    ChatResponse(
                        text=cached,
                        prompt_chars=request.prompt_chars,
                        completion_chars=len(cached),
                        from_cache=True,
                    ),
                )

        text = self._generate(request)

        response = ChatResponse(
            text=text,
            prompt_chars=request.prompt_chars,
            completion_chars=len(text),
            estimated_cost=estimate_cost(
                request.prompt_chars, len(text), self.prices.get(self.model)
            ),
        )

        with self._lock:
            self._stats = self._stats + CallStats(
                calls=1,
                prompt_chars=response.prompt_chars,
                completion_chars=response.completion_chars,
                estimated_cost=response.estimated_cost,
            )

        if self.cache is not None:
            self.cache.put(key, text)

        return self._record(key, request, response)

    def _record(
        self, key: str, request: ChatRequest, response: ChatResponse
    ) -> ChatResponse:
        """Write a response to the session, whether it came from cache or not."""

        if self.recorder is not None:
            self.recorder.write(key, request, response, self.describe())

        return response

    def complete_many(self, requests: Sequence[ChatRequest]) -> list[ChatResponse]:
        """
        Complete several independent requests, concurrently if the backend allows it.

        Args:
            requests: The requests.

        Returns:
            The responses, in the order of the requests.
        """

        if self.max_concurrency <= 1 or len(requests) <= 1:
            return [self.complete(request) for request in requests]

        workers = min(self.max_concurrency, len(requests))

        with ThreadPoolExecutor(max_workers=workers) as executor:
            return list(executor.map(self.complete, requests))

    def snapshot_stats(self) -> CallStats:
        """
        Get the stats so far.

        Returns:
            A point in time copy, that later calls do not change.
        """

        with self._lock:
            return self._stats

    def describe(self) -> dict[str, Any]:
        return {"endpoint": self.endpoint_id, "model": self.model}
