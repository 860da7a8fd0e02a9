from typing import Mapping, Optional

from docteam.backend.base import Backend
from docteam.backend.cache import ResponseCache
from docteam.backend.http import HttpBackend
from docteam.backend.scripted import ScriptedBackend, ScriptedScript
from docteam.backend.session import record_and_replay
from docteam.config import BackendConfig, PriceEntry


def create_backend(
    config: BackendConfig, prices: Optional[Mapping[str, PriceEntry]] = None
) -> Backend:
    """
    Create the backend described by a configuration.

    Args:
        config: The backend configuration.
        prices: Price table, mapping model names to prices.

    Returns:
        A scripted, replaying or live backend. A live or scripted backend records its
        calls when ``record_path`` is set.

    Raises:
        ValueError: If the path the backend kind requires is missing.
    """

    if config.kind == "replay":
        if config.session_path is None:
            raise ValueError("A replay backend requires a session_path.")

        return record_and_replay(config.session_path, prices=prices)

    cache = None if config.cache_path is None else ResponseCache(config.cache_path)
    backend: Backend

    if config.kind == "scripted":
        if config.script_path is None:
            raise ValueError("A scripted backend requires a script_path.")

        backend = ScriptedBackend(
            ScriptedScript.from_file(config.script_path), prices=prices, cache=cache
        )
    else:
        backend = HttpBackend(config, prices=prices, cache=cache)

    if config.record_path is not None:
        backend = record_and_replay(config.record_path, backend=backend)

    return backend
