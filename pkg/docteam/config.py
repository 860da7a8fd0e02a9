import hashlib
import json
from pathlib import Path
from typing import Any, Literal, Optional, Union

import toml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from docteam.errors import ConfigError

SOLO_STRATEGIES = ("zero-shot", "few-shot", "cot", "cot-sc", "er", "medprompt")
"""The single-agent strategies, selected with ``mode = "solo:<strategy>"``."""

GROUP_METHODS = ("majority", "weighted", "borda")
"""The voting methods, selected with ``mode = "group:<method>"``."""

FORCED_MODES = ("pcp", "mdt", "ict")

MODES = (
    ("adaptive",)
    + FORCED_MODES
    + tuple(f"solo:{strategy}" for strategy in SOLO_STRATEGIES)
    + tuple(f"group:{method}" for method in GROUP_METHODS)
)

DEFAULT_TEMPERATURES = {
    "classify": 0.0,
    "recruit": 0.0,
    "agent": 0.0,
    "answer": 0.0,
    "sample": 0.7,
    "moderator": 0.0,
    "decide": 0.0,
}


def _check_temperature(value: float) -> float:
    if not 0 <= value <= 2:
        raise ValueError(f"temperature must be in [0, 2], got {value}")

    return value


class RunConfig(BaseModel):
    """How a single query (or a batch of queries) is answered."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    mode: str = "adaptive"
    n_max: int = Field(default=3, ge=1)
    rounds: int = Field(default=3, ge=1)
    turns: int = Field(default=2, ge=1)
    consensus_threshold: float = Field(default=1.0, gt=0, le=1)
    review_enabled: bool = True
    retrieval_enabled: bool = False
    knowledge_init_enabled: bool = False
    retrieval_k: int = Field(default=3, ge=0)
    decision_method: Literal["direct", "ensemble"] = "direct"
    ensemble_temperatures: tuple[float, ...] = (0.0, 0.5, 1.0)
    temperatures: dict[str, float] = Field(
        default_factory=lambda: dict(DEFAULT_TEMPERATURES)
    )
    seed: int = 0
    shot_count: int = Field(default=3, ge=0)
    sc_samples: int = Field(default=5, ge=1)
    er_paths: int = Field(default=3, ge=1)
    medprompt_shuffles: int = Field(default=5, ge=1)
    medprompt_shots: int = Field(default=3, ge=0)
    max_tokens: dict[str, int] = Field(default_factory=dict)
    default_max_tokens: int = Field(default=512, ge=1)
    feedback_per_agent: bool = False
    ict_parallel: bool = False
    record_timing: bool = False

    @field_validator("mode")
    @classmethod
    def _check_mode(cls, value: str) -> str:
        if value not in MODES:
            raise ValueError(f"unknown mode {value}, expected one of {MODES}")

        return value

    @field_validator("temperatures", mode="before")
    @classmethod
    def _merge_temperatures(cls, value: Any) -> dict[str, float]:
        merged = {**DEFAULT_TEMPERATURES, **dict(value)}

        for temperature in merged.values():
            _check_temperature(temperature)

        return merged

    @field_validator("ensemble_temperatures")
    @classmethod
    def _check_ensemble(cls, value: tuple[float, ...]) -> tuple[float, ...]:
        if not value:
            raise ValueError("ensemble_temperatures cannot be empty")

        for temperature in value:
            _check_temperature(temperature)

        return value

    def temperature(self, step: str) -> float:
        """The temperature for a step, e.g. ``"classify"``."""
        return self.temperatures.get(step, self.temperatures["agent"])

    def max_tokens_for(self, tag: str) -> int:
        """
        The maximum number of completion tokens for a request.

        Args:
            tag: The step tag of the request, e.g. ``"mdt.turn"``. The most specific
                configured prefix wins (``"mdt.turn"``, then ``"mdt"``).

        Returns:
            The configured limit, or ``default_max_tokens``.
        """

        parts = tag.split(".")

        for end in range(len(parts), 0, -1):
            prefix = ".".join(parts[:end])

            if prefix in self.max_tokens:
                return self.max_tokens[prefix]

        return self.default_max_tokens

    def with_overrides(self, **overrides: Any) -> "RunConfig":
        """A validated copy with some fields replaced."""
        return RunConfig.model_validate({**self.model_dump(), **overrides})

    def config_hash(self) -> str:
        """A short, stable fingerprint of this configuration."""

        dump = json.dumps(self.model_dump(mode="json"), sort_keys=True)

        return hashlib.sha256(dump.encode("utf-8")).hexdigest()[:12]


class BackendConfig(BaseModel):
    """Which language model backend to use, and how to reach it."""

    model_config = ConfigDict(extra="forbid")

    kind: Literal["http", "scripted", "replay"] = "scripted"
    base_url: Optional[str] = None
    model: str = "gpt-4o-mini"
    api_key_env: str = "OPENAI_API_KEY"
    """The name of the environment variable that holds the API key."""

    timeout: float = Field(default=60.0, gt=0)
    max_retries: int = Field(default=3, ge=1)
    initial_backoff: float = Field(default=1.0, ge=0)
    max_concurrency: int = Field(default=4, ge=1)
    requests_per_minute: Optional[int] = Field(default=None, ge=1)
    cache_path: Optional[str] = None
    record_path: Optional[str] = None
    script_path: Optional[str] = None
    session_path: Optional[str] = None


class PriceEntry(BaseModel):
    """USD per 1000 tokens."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    prompt: float = Field(default=0.0, ge=0)
    completion: float = Field(default=0.0, ge=0)


class Settings(BaseModel):
    """Everything a run needs, as read from a configuration file."""

    model_config = ConfigDict(extra="forbid")

    run: RunConfig = Field(default_factory=RunConfig)
    backend: BackendConfig = Field(default_factory=BackendConfig)
    prices: dict[str, PriceEntry] = Field(default_factory=dict)
    exemplars_path: Optional[str] = None
    corpus_path: Optional[str] = None
    parallelism: int = Field(default=4, ge=1)


def load_settings(path: Optional[Union[str, Path]] = None) -> Settings:
    """
    Read settings from a TOML file.

    Args:
        path: The file to read. Defaults are used when no path is given.

    Returns:
        The validated settings.

    Raises:
        ConfigError: If the file cannot be read, is not valid TOML, or does not
            validate.
    """

    if path is None:
        return Settings()

    try:
        data = toml.load(path)
    except (OSError, toml.TomlDecodeError) as exc:
        raise ConfigError(f"Cannot read configuration {path}: {exc}") from exc

    try:
        settings = Settings.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(f"Invalid configuration {path}: {exc}") from exc

    return _resolve_paths(settings, Path(path).parent)


def _resolve_paths(settings: Settings, base: Path) -> Settings:
    """Make relative file paths in the settings relative to ``base``."""

    def resolve(value: Optional[str]) -> Optional[str]:
        if value is None or Path(value).is_absolute():
            return value

        return str(base / value)

    backend = settings.backend.model_copy(
        update={name: resolve(getattr(settings.backend, name)) for name in _PATH_FIELDS}
    )

    return settings.model_copy(
        update={
            "backend": backend,
            "exemplars_path": resolve(settings.exemplars_path),
            "corpus_path": resolve(settings.corpus_path),
        }
    )


_PATH_FIELDS = ("cache_path", "record_path", "script_path", "session_path")
