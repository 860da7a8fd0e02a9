import json
import logging
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Mapping, Optional, Union

from docteam.backend.base import Backend, ChatRequest
from docteam.backend.cache import ResponseCache
from docteam.config import PriceEntry
from docteam.errors import ScriptExhaustedError, ScriptMismatchError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ScriptEntry:
    """A canned response, and the requests it may answer."""

    response: str
    tag: Optional[str] = None
    """Matches requests with this tag, or a tag below it (``"mdt"`` matches
    ``"mdt.turn"``)."""

    contains: Optional[str] = None
    """Matches requests that contain this text in their system prompt or messages."""

    repeat: bool = False
    """Whether the entry is reused rather than consumed (match mode only)."""

    def matches(self, request: ChatRequest) -> bool:
        if self.tag is not None and not (
            request.tag == self.tag or request.tag.startswith(self.tag + ".")
        ):
            return False

        if self.contains is not None and self.contains not in request.text():
            return False

        return True

    @classmethod
    def from_item(cls, item: Union[str, Mapping[str, Any]]) -> "ScriptEntry":
        if isinstance(item, str):
            return cls(response=item)

        return cls(
            response=item["response"],
            tag=item.get("tag"),
            contains=item.get("contains"),
            repeat=bool(item.get("repeat", False)),
        )


@dataclass(frozen=True)
class ScriptedScript:
    """
    An ordered list of canned responses.

    In strict FIFO mode, requests consume the entries in order and an entry that
    does not match the request is an error. Otherwise, each request is answered by
    the first unconsumed entry that matches it.
    """

    entries: tuple[ScriptEntry, ...]
    strict_fifo: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "entries", tuple(self.entries))

    @classmethod
    def from_responses(
        cls, responses: Iterable[str], strict_fifo: bool = True
    ) -> "ScriptedScript":
        return cls(tuple(ScriptEntry(response) for response in responses), strict_fifo)

    @classmethod
    def from_data(cls, data: Any) -> "ScriptedScript":
        """
        Build a script from decoded JSON: either a list of entries, or an object with
        ``entries`` and ``mode`` (``"fifo"`` or ``"match"``). Entries are strings or
        objects with ``response`` and optionally ``tag``, ``contains`` and ``repeat``.
        """

        if isinstance(data, list):
            return cls(tuple(ScriptEntry.from_item(item) for item in data))

        if isinstance(data, dict) and isinstance(data.get("entries"), list):
            mode = data.get("mode", "fifo")

            if mode not in ("fifo", "match"):
                raise ValueError(f"Unknown script mode {mode}.")

            return cls(
                tuple(ScriptEntry.from_item(item) for item in data["entries"]),
                strict_fifo=mode == "fifo",
            )

        raise ValueError("A script is a list of entries, or an object with entries.")

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "ScriptedScript":
        with Path(path).open(encoding="utf-8") as file:
            return cls.from_data(json.load(file))


class ScriptedBackend(Backend):
    """
    A deterministic backend that answers from a script. Requests are served one at a
    time, so that a script is consumed in the order the requests are issued.

    Args:
        script: The script to answer from.
        prices: Price table, mapping model names to prices.
        cache: An optional response cache.
        model: The model name reported for cost estimation and request hashing.
    """

    endpoint_id = "scripted"

    def __init__(
        self,
        script: ScriptedScript,
        prices: Optional[Mapping[str, PriceEntry]] = None,
        cache: Optional[ResponseCache] = None,
        model: str = "scripted",
    ) -> None:
        super().__init__(model=model, prices=prices, cache=cache, max_concurrency=1)

        self.script = script
        self._cursor = 0
        self._consumed: set[int] = set()
        self._script_lock = threading.Lock()

    @classmethod
    def from_responses(
        cls, responses: Iterable[str], **kwargs: Any
    ) -> "ScriptedBackend":
        return cls(ScriptedScript.from_responses(responses), **kwargs)

    @property
    def remaining(self) -> int:
        """The number of entries that have not been consumed."""

        if self.script.strict_fifo:
            return len(self.script.entries) - self._cursor

        return len(self.script.entries) - len(self._consumed)

    def _generate(self, request: ChatRequest) -> str:
        if any(message.attachment is not None for message in request.messages):
            logger.warning("Scripted backend ignores the attachment of %s", request.tag)

        with self._script_lock:
            if self.script.strict_fifo:
                return self._next_in_order(request)

            return self._first_match(request)

    def _next_in_order(self, request: ChatRequest) -> str:
        if self._cursor >= len(self.script.entries):
            raise ScriptExhaustedError(
                f"Script exhausted after {self._cursor} responses, at request "
                f"{request.tag}."
            )

        entry = self.script.entries[self._cursor]

        if not entry.matches(request):
            raise ScriptMismatchError(
                f"Script entry {self._cursor} (tag {entry.tag}) does not match request "
                f"{request.tag}."
            )

        self._cursor += 1

        return entry.response

    def _first_match(self, request: ChatRequest) -> str:
        for index, entry in enumerate(self.script.entries):
            if index in self._consumed or not entry.matches(request):
                continue

            if not entry.repeat:
                self._consumed.add(index)

            return entry.response

        raise ScriptExhaustedError(f"No scripted response left for {request.tag}.")
