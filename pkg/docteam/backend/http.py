import base64
import logging
import mimetypes
import os
import threading
import time
from pathlib import Path
from typing import Any, Callable, Mapping, Optional

import backoff
import httpx
import openai

from docteam.backend.base import Backend, ChatRequest, Message
from docteam.backend.cache import ResponseCache
from docteam.config import BackendConfig, PriceEntry
from docteam.errors import BackendUnavailableError, RequestRejectedError
from docteam.query import Attachment

logger = logging.getLogger(__name__)


def _is_client_error(exc: Exception) -> bool:
    return isinstance(exc, openai.APIStatusError) and exc.status_code < 500


class HttpBackend(Backend):
    """
    A live backend that speaks the chat completion wire format, through the
    ``openai`` SDK. Works with any compatible endpoint.

    Transport failures and server errors are retried with exponential backoff. Client
    errors (4xx) are never retried.

    Args:
        config: Where the endpoint is and how to call it. The API key is read from the
            environment variable named in the config.
        prices: Price table, mapping model names to prices.
        cache: An optional response cache.
        client: A preconfigured client, used instead of creating one.
        sleep: The function used to wait between requests when throttling.
    """

    def __init__(  # pylint: disable=R0913
        self,
        config: BackendConfig,
        prices: Optional[Mapping[str, PriceEntry]] = None,
        cache: Optional[ResponseCache] = None,
        client: Optional[Any] = None,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        super().__init__(
            model=config.model,
            prices=prices,
            cache=cache,
            max_concurrency=config.max_concurrency,
        )

        self.endpoint_id = config.base_url or "openai"
        self.config = config
        self._client = client if client is not None else self._make_client(config)
        self._sleep = sleep
        self._throttle_lock = threading.Lock()
        self._next_slot = 0.0

    @staticmethod
    def _make_client(config: BackendConfig) -> openai.OpenAI:
        api_key = os.environ.get(config.api_key_env)

        if not api_key:
            logger.warning(
                "Environment variable %s is not set, calls will be rejected.",
                config.api_key_env,
            )

        return openai.OpenAI(
            api_key=api_key or "missing",
            base_url=config.base_url,
            timeout=httpx.Timeout(config.timeout, connect=min(config.timeout, 30.0)),
            max_retries=0,
        )

    def _throttle(self) -> None:
        if self.config.requests_per_minute is None:
            return

        interval = 60.0 / self.config.requests_per_minute

        with self._throttle_lock:
            now = time.monotonic()
            wait = self._next_slot - now
            self._next_slot = max(now, self._next_slot) + interval

        if wait > 0:
            self._sleep(wait)

    def _log_retry(self, details: dict) -> None:
        logger.warning(
            "Chat completion failed (attempt %d/%d): %s. Retrying in %.1fs.",
            details["tries"],
            self.config.max_retries,
            details["exception"],
            details["wait"],
        )

    def _payload(self, request: ChatRequest) -> dict[str, Any]:
        payload: dict[str, Any] = {
            "model": self.model,
            "messages": [{"role": "system", "content": request.system}]
            + [_wire_message(message) for message in request.messages],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }

        if request.seed is not None:
            payload["seed"] = request.seed

        return payload

    def _generate(self, request: ChatRequest) -> str:
        payload = self._payload(request)

        @backoff.on_exception(
            backoff.expo,
            (openai.APIConnectionError, openai.APIStatusError),
            max_tries=self.config.max_retries,
            factor=self.config.initial_backoff,
            jitter=None,
            giveup=_is_client_error,
            on_backoff=self._log_retry,
            logger=None,
        )
        def create() -> Any:
            self._throttle()
            return self._client.chat.completions.create(**payload)

        try:
            completion = create()
        except openai.APIStatusError as exc:
            if _is_client_error(exc):
                raise RequestRejectedError(
                    f"Request {request.tag} rejected with status {exc.status_code}: "
                    f"{exc.message}"
                ) from exc

            raise BackendUnavailableError(
                f"Endpoint failed after {self.config.max_retries} attempts: {exc}"
            ) from exc
        except openai.APIConnectionError as exc:
            raise BackendUnavailableError(
                f"Endpoint unreachable after {self.config.max_retries} attempts: {exc}"
            ) from exc

        return completion.choices[0].message.content or ""


def _wire_message(message: Message) -> dict[str, Any]:
    if message.attachment is None:
        return {"role": message.role, "content": message.text}

    return {
        "role": message.role,
        "content": [
            {"type": "text", "text": message.text},
            {"type": "image_url", "image_url": {"url": _image_url(message.attachment)}},
        ],
    }


def _image_url(attachment: Attachment) -> str:
    """Encode an image as a data url, unless it already is a url."""

    if isinstance(attachment, str) and attachment.startswith(
        ("http://", "https://", "data:")
    ):
        return attachment

    if isinstance(attachment, bytes):
        data, mime = attachment, "image/png"
    else:
        data = Path(attachment).read_bytes()
        mime = mimetypes.guess_type(attachment)[0] or "image/png"

    return f"data:{mime};base64,{base64.b64encode(data).decode('ascii')}"
