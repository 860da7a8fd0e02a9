import json
import threading
from collections import defaultdict
from pathlib import Path
from typing import Any, Mapping, Optional, Union

from docteam.backend.base import Backend, ChatRequest, ChatResponse
from docteam.config import PriceEntry
from docteam.errors import ReplayMissError


class SessionRecorder:
    """
    Appends every completed call of a backend to a JSON lines session file.

    Args:
        path: The session file. It is truncated when the recorder is created.
    """

    def __init__(self, path: Union[str, Path]) -> None:
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text("", encoding="utf-8")
        self._lock = threading.Lock()

    def write(
        self,
        request_hash: str,
        request: ChatRequest,
        response: ChatResponse,
        source: Optional[Mapping[str, Any]] = None,
    ) -> None:
        line = json.dumps(
            {
                **dict(source or {}),
                "request_hash": request_hash,
                "tag": request.tag,
                "response_text": response.text,
                "prompt_chars": response.prompt_chars,
                "completion_chars": response.completion_chars,
                "from_cache": response.from_cache,
            },
            ensure_ascii=False,
        )

        with self._lock:
            with self.path.open("a", encoding="utf-8") as file:
                file.write(line + "\n")


class ReplayBackend(Backend):
    """
    Serves the responses of a recorded session, and never touches the network.

    Requests are matched on their hash, so the endpoint and model must be the ones
    the session was recorded with. A request that was recorded more than once is
    served the recorded responses in order, and the last one after that.

    Args:
        path: The session file.
        endpoint_id: The endpoint the session was recorded against. Defaults to the
            endpoint stored in the session.
        model: The model the session was recorded with. Defaults to the model stored
            in the session.
        prices: Price table, mapping model names to prices.

    Raises:
        ValueError: If the endpoint or model is neither given nor stored.
    """

    def __init__(
        self,
        path: Union[str, Path],
        endpoint_id: Optional[str] = None,
        model: Optional[str] = None,
        prices: Optional[Mapping[str, PriceEntry]] = None,
    ) -> None:
        self._responses: dict[str, list[str]] = defaultdict(list)
        self._served: dict[str, int] = defaultdict(int)
        self._replay_lock = threading.Lock()

        with Path(path).open(encoding="utf-8") as file:
            for line in file:
                if line.strip():
                    entry = json.loads(line)
                    key, text = entry["request_hash"], entry["response_text"]
                    self._responses[key].append(text)
                    endpoint_id = endpoint_id or entry.get("endpoint")
                    model = model or entry.get("model")

        if endpoint_id is None or model is None:
            raise ValueError(f"Session {path} does not say which endpoint it is from.")

        super().__init__(model=model, prices=prices, max_concurrency=1)
        self.endpoint_id = endpoint_id

    def _generate(self, request: ChatRequest) -> str:
        key = self.request_hash(request)

        with self._replay_lock:
            responses = self._responses.get(key)

            if not responses:
                raise ReplayMissError(key)

            index = min(self._served[key], len(responses) - 1)
            self._served[key] += 1

            return responses[index]


def record_and_replay(
    session_path: Union[str, Path],
    backend: Optional[Backend] = None,
    endpoint_id: Optional[str] = None,
    model: Optional[str] = None,
    prices: Optional[Mapping[str, PriceEntry]] = None,
) -> Backend:
    """
    Get a backend that records to, or replays from, a session file.

    Args:
        session_path: The session file.
        backend: When given, this backend is returned, recording every call it makes
            to the session file. When absent, a :class:`.ReplayBackend` over the
            session file is returned.
        endpoint_id: Overrides the endpoint stored in the session (replay only).
        model: Overrides the model stored in the session (replay only).
        prices: Price table for the replayed calls (replay only).

    Returns:
        The backend handle.
    """

    if backend is not None:
        backend.recorder = SessionRecorder(session_path)
        return backend

    return ReplayBackend(
        session_path, endpoint_id=endpoint_id, model=model, prices=prices
    )
