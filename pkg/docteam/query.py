import base64
import functools
import string
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional, Union

from frozendict import frozendict

OPTION_LETTERS = string.ascii_uppercase
"""The letters that may key the options of a query, in order."""

CLOSED_ANSWERS = ("yes", "no", "maybe")
"""The answer keys of queries without lettered options."""

Attachment = Union[str, bytes]
"""An image reference: a file path (or URL), or the raw image bytes."""


def canonical_answer(value: str) -> Optional[str]:
    """
    Bring an answer in canonical form: an uppercase letter, or a lowercase ``yes``,
    ``no`` or ``maybe``.

    Args:
        value: The answer as written, e.g. ``"(b)"`` or ``"Yes"``.

    Returns:
        The canonical answer, or ``None`` if the value is not a recognizable answer.
    """

    value = value.strip().strip("().*: ").strip()

    if len(value) == 1 and value.upper() in OPTION_LETTERS:
        return value.upper()

    if value.casefold() in CLOSED_ANSWERS:
        return value.casefold()

    return None


@functools.total_ordering
class ComplexityLevel(Enum):
    """The complexity of a query, which selects the collaboration structure."""

    LOW = "low"
    MODERATE = "moderate"
    HIGH = "high"

    @property
    def rank(self) -> int:
        """The position of this level in the order ``LOW < MODERATE < HIGH``."""
        return _LEVEL_RANKS[self]

    def __lt__(self, other: object) -> bool:
        if not isinstance(other, ComplexityLevel):
            return NotImplemented

        return self.rank < other.rank


_LEVEL_RANKS = {
    ComplexityLevel.LOW: 0,
    ComplexityLevel.MODERATE: 1,
    ComplexityLevel.HIGH: 2,
}


@dataclass(frozen=True)
class Query:  # pylint: disable=R0902
    """A single benchmark item that is put to the agents."""

    id: str  # pylint: disable=C0103
    """The identifier, unique within a dataset."""

    question: str
    """The question text."""

    options: frozendict = field(default_factory=frozendict)
    """Option letters mapped to option texts, in display order. Empty for questions
    with a closed (yes/no/maybe) answer."""

    context: Optional[str] = None
    """An optional passage the question is about."""

    attachment: Optional[Attachment] = field(default=None, repr=False)
    """An optional image, passed to the backend as is."""

    gold: Optional[str] = None
    """The correct answer, in canonical form, if known."""

    dataset_tag: str = ""
    """The name of the dataset this query comes from."""

    def __post_init__(self) -> None:
        if not isinstance(self.options, frozendict):
            object.__setattr__(self, "options", frozendict(self.options))

        if self.gold is not None:
            object.__setattr__(self, "gold", canonical_answer(self.gold) or self.gold)

    @property
    def option_keys(self) -> tuple[str, ...]:
        """The keys an answer must be one of."""

        if self.options:
            return tuple(self.options.keys())

        return CLOSED_ANSWERS

    def fallback_answer(self) -> str:
        """The answer used when no answer could be extracted from model output."""
        return min(self.option_keys)

    def to_dict(self) -> dict[str, Any]:
        """Serialize to a ``dict`` with JSON-compatible values."""

        attachment: Any = self.attachment

        if isinstance(attachment, bytes):
            attachment = {"base64": base64.b64encode(attachment).decode("ascii")}

        return {
            "id": self.id,
            "question": self.question,
            "options": dict(self.options),
            "context": self.context,
            "attachment": attachment,
            "gold": self.gold,
            "dataset_tag": self.dataset_tag,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Query":
        """Deserialize the output of :meth:`to_dict`."""

        attachment = data.get("attachment")

        if isinstance(attachment, dict):
            attachment = base64.b64decode(attachment["base64"])

        return cls(
            id=data["id"],
            question=data["question"],
            options=frozendict(data.get("options") or {}),
            context=data.get("context"),
            attachment=attachment,
            gold=data.get("gold"),
            dataset_tag=data.get("dataset_tag", ""),
        )


def validate_query(query: Query) -> list[str]:
    """
    Check a query against the invariants of its fields.

    Args:
        query: The query to validate.

    Returns:
        A description of every violation found. The query is valid if and only if
        this list is empty.
    """

    violations = []
    keys = list(query.options.keys())

    if not query.question.strip():
        violations.append("empty question")

    if len(keys) > len(OPTION_LETTERS):
        violations.append("more than 26 options")

    if any(len(key) != 1 or key not in OPTION_LETTERS for key in keys):
        violations.append("option letters must be single uppercase letters")

    if len({key.upper() for key in keys}) != len(keys):
        violations.append("duplicate option letters")

    if sorted(keys) != list(OPTION_LETTERS[: len(keys)]):
        violations.append("non-contiguous letters")

    if query.gold is not None and query.gold not in query.option_keys:
        violations.append("gold not an option")

    return violations
