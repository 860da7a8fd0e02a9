import json
import logging
import threading
from pathlib import Path
from typing import Optional, Union

logger = logging.getLogger(__name__)


class ResponseCache:
    """
    Maps request hashes to completion texts. When a path is given, the cache is read
    from and appended to a JSON lines file, so that it survives between runs.

    Args:
        path: The cache file. Kept in memory only if ``None``.
    """

    def __init__(self, path: Optional[Union[str, Path]] = None) -> None:
        self.path = None if path is None else Path(path)
        self._entries: dict[str, str] = {}
        self._lock = threading.Lock()

        if self.path is not None and self.path.exists():
            self._load(self.path)

    def _load(self, path: Path) -> None:
        with path.open(encoding="utf-8") as file:
            for line_number, line in enumerate(file, start=1):
                if not line.strip():
                    continue

                try:
                    entry = json.loads(line)
                    self._entries[entry["key"]] = entry["text"]
                except (json.JSONDecodeError, KeyError, TypeError):
                    logger.warning(
                        "Skipping unreadable cache entry on line %d of %s",
                        line_number,
                        path,
                    )

    def get(self, key: str) -> Optional[str]:
        with self._lock:
            return self._entries.get(key)

    def put(self, key: str, text: str) -> None:
        with self._lock:
            if key in self._entries:
                return

            self._entries[key] = text

            if self.path is not None:
                self.path.parent.mkdir(parents=True, exist_ok=True)

                with self.path.open("a", encoding="utf-8") as file:
                    file.write(json.dumps({"key": key, "text": text}) + "\n")

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, key: str) -> bool:
        return key in self._entries
