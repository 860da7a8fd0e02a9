from dataclasses import dataclass
from enum import Enum
from typing import Generic, Optional, TypeVar

T = TypeVar("T")


class Confidence(Enum):
    """How a parsed value was obtained."""

    EXACT = "exact"
    """The output followed the requested format."""

    HEURISTIC = "heuristic"
    """The value was inferred from output that did not follow the format."""

    FALLBACK = "fallback"
    """No value could be obtained."""


@dataclass(frozen=True)
class ParseOutcome(Generic[T]):
    """The result of parsing model output. Parsing never raises on odd output."""

    value: Optional[T]
    confidence: Confidence
    raw: str
    warnings: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if (self.value is None) != (self.confidence is Confidence.FALLBACK):
            raise ValueError("A value is absent if and only if parsing fell back.")

    @property
    def ok(self) -> bool:
        return self.value is not None

    @classmethod
    def fallback(cls, raw: str, warnings: tuple[str, ...] = ()) -> "ParseOutcome":
        return cls(
            value=None, confidence=Confidence.FALLBACK, raw=raw, warnings=warnings
        )
