import re
import unicodedata
from abc import ABC, abstractmethod
from typing import Sequence

_TOKEN_PATTERN = re.compile(r"[^\W_]+")


class StringModifier(ABC):
    """Modifies strings, for instance to normalize role names before matching."""

    @abstractmethod
    def process(self, item: str) -> str:
        """
        Processes a string by modifying it.

        Args:
            item: The input string.

        Returns:
            The output string.
        """


class CasefoldString(StringModifier):
    """Casefold a string."""

    def process(self, item: str) -> str:
        return item.casefold()


class ReplaceNonAsciiCharacters(StringModifier):
    """Maps accented characters to their ascii counterpart, e.g. Renée -> Renee."""

    def process(self, item: str) -> str:
        return unicodedata.normalize("NFD", item).encode("ascii", "ignore").decode()


class ReplaceValueRegexp(StringModifier):
    """
    Replace a value in a string with regexp.

    Args:
        find_value: The input regexp.
        replace_value: The value to replace it with.
    """

    def __init__(self, find_value: str, replace_value: str) -> None:
        self.find_value = find_value
        self.replace_value = replace_value

    def process(self, item: str) -> str:
        return re.sub(self.find_value, self.replace_value, item)


class CollapseWhitespace(StringModifier):
    """Replace runs of whitespace by a single space, and strip the ends."""

    def process(self, item: str) -> str:
        return " ".join(item.split())


ROLE_NORMALIZERS: tuple[StringModifier, ...] = (
    ReplaceNonAsciiCharacters(),
    CasefoldString(),
    ReplaceValueRegexp(r"[^\w\s]|_", " "),
    CollapseWhitespace(),
)
"""Turns ``"**Dr. Smith, Cardiologist**"`` into ``"dr smith cardiologist"``."""


def normalize(text: str, modifiers: Sequence[StringModifier] = ROLE_NORMALIZERS) -> str:
    """Apply a sequence of string modifiers, in order."""

    for modifier in modifiers:
        text = modifier.process(text)

    return text


def roles_match(role: str, mention: str) -> bool:
    """
    Whether a mention of a role in model output refers to a role, i.e. whether one
    contains the other after normalization (``"Pediatric Cardiologist"`` mentions
    ``"Cardiologist"`` and vice versa).
    """

    role, mention = normalize(role), normalize(mention)

    if not role or not mention:
        return False

    return _contains_words(mention, role) or _contains_words(role, mention)


def _contains_words(haystack: str, needle: str) -> bool:
    return f" {needle} " in f" {haystack} "


def find_mention(text: str, role: str) -> int:
    """
    Find where a role is first mentioned in a text.

    Returns:
        The index of the first mention in the normalized text, or ``-1``.
    """

    needle = normalize(role)

    if not needle:
        return -1

    haystack = f" {normalize(text)} "
    index = haystack.find(f" {needle} ")

    return index


def lexical_tokens(text: str) -> list[str]:
    """Lowercase word tokens, split on whitespace and punctuation."""
    return _TOKEN_PATTERN.findall(text.casefold())


def token_overlap(first: str, second: str) -> float:
    """
    The lexical similarity of two texts: the Jaccard index of their token sets.

    Returns:
        A score in ``[0, 1]``, 0 when either text has no tokens.
    """

    first_tokens = set(lexical_tokens(first))
    second_tokens = set(lexical_tokens(second))

    if not first_tokens or not second_tokens:
        return 0.0

    return len(first_tokens & second_tokens) / len(first_tokens | second_tokens)
