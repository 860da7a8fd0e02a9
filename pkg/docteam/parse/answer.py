import logging
import re
from typing import Iterable, Mapping, Optional

from docteam.parse.outcome import Confidence, ParseOutcome

logger = logging.getLogger(__name__)

_ANSWER_SLOT = re.compile(
    r"(?i:\banswer\b)\s*\**\s*[:：]\s*\**\s*\(?\s*(?P<key>[A-Za-z]+)\b"
)
_SLOT_LETTER_END = re.compile(r"[ \t\r]*(?:[).,*]|$)", re.MULTILINE)
_LEADING_LETTER = re.compile(r"^\s*\(?(?P<key>[A-Z])\)")
_LETTER_TOKEN = re.compile(r"(?<![A-Za-z0-9'’])\(?([A-Z])\)?(?![A-Za-z0-9'’])")
_WORD_TOKEN = re.compile(r"\b(yes|no|maybe)\b", re.IGNORECASE)
_CONFIDENCE = re.compile(
    r"(?i:\bconfidence\b)[^0-9\n]{0,20}?(?P<value>\d*\.?\d+)\s*(?P<percent>%)?"
)


def _letter_mode(keys: tuple[str, ...]) -> bool:
    return all(len(key) == 1 and key.isupper() for key in keys)


def _token_pattern(keys: tuple[str, ...]) -> re.Pattern:
    return _LETTER_TOKEN if _letter_mode(keys) else _WORD_TOKEN


def _as_key(token: str, keys: tuple[str, ...]) -> Optional[str]:
    candidate = token if _letter_mode(keys) else token.casefold()

    return candidate if candidate in keys else None


def _slot_token(match: re.Match) -> str:
    """
    The key in an answer slot. A single lowercase letter is an option letter only when
    it stands on its own, as in ``(c)`` or ``c.``, and not as in ``a drug``.
    """

    token = match.group("key")

    if len(token) == 1 and _SLOT_LETTER_END.match(match.string, match.end()):
        return token.upper()

    return token


def _mentions(text: str, keys: tuple[str, ...]) -> list[str]:
    """All keys mentioned in a text, as tokens, in order of appearance."""

    pattern = _token_pattern(keys)
    found = (_as_key(match.group(1), keys) for match in pattern.finditer(text))

    return [key for key in found if key is not None]


def _ordered_unique(items: Iterable[str]) -> list[str]:
    return list(dict.fromkeys(items))


def extract_answer(
    text: str,
    option_keys: Iterable[str],
    options: Optional[Mapping[str, str]] = None,
) -> ParseOutcome[str]:
    """
    Extract a canonical answer from model output.

    Args:
        text: The model output.
        option_keys: The valid answers: option letters, or ``yes``, ``no``, ``maybe``.
        options: The option texts, used to recognize an answer that is given by its
            text rather than its letter.

    Returns:
        An exact outcome when the output has an answer slot like ``**Answer:** (C)``,
        a heuristic outcome when exactly one key (or option text) is mentioned, and a
        fallback otherwise.

    Raises:
        ValueError: If no option keys are given.
    """

    keys = tuple(option_keys)

    if not keys:
        raise ValueError("Cannot extract an answer without option keys.")

    slots = [
        _as_key(_slot_token(match), keys)
        for match in _ANSWER_SLOT.finditer(text)
    ]
    slots = [key for key in slots if key is not None]

    if slots:
        return ParseOutcome(slots[-1], Confidence.EXACT, text)

    leading = _LEADING_LETTER.match(text)

    if leading and _letter_mode(keys) and leading.group("key") in keys:
        return ParseOutcome(leading.group("key"), Confidence.EXACT, text)

    mentioned = set(_mentions(text, keys))

    if len(mentioned) == 1:
        return ParseOutcome(mentioned.pop(), Confidence.HEURISTIC, text)

    if not mentioned and options:
        folded = text.casefold()
        by_text = {
            key
            for key, option in options.items()
            if key in keys and len(option.strip()) >= 3 and option.casefold() in folded
        }

        if len(by_text) == 1:
            return ParseOutcome(by_text.pop(), Confidence.HEURISTIC, text)

    logger.info("No answer found in output: %.80s", text)

    return ParseOutcome.fallback(text)


def parse_confidence(text: str, default: float = 1.0) -> float:
    """
    Parse a self-reported confidence like ``**Confidence:** 0.8`` or ``80%``.

    Args:
        text: The model output.
        default: The confidence to use when none is reported.

    Returns:
        The confidence, clipped to ``[0, 1]``.
    """

    match = _CONFIDENCE.search(text)

    if match is None:
        return default

    value = float(match.group("value"))

    if match.group("percent") or value > 1:
        value /= 100

    return min(1.0, max(0.0, value))


def parse_ranking(
    text: str, option_keys: Iterable[str]
) -> ParseOutcome[tuple[str, ...]]:
    """
    Parse a ranking of the options, best first.

    Args:
        text: The model output.
        option_keys: The option keys to rank.

    Returns:
        An exact outcome when the output contains a complete ranking, as a chain
        (``A > C > B > D``) or an enumerated list. Otherwise, when any key is
        mentioned, a heuristic outcome that completes the keys in order of mention
        with the missing keys in letter order. A fallback when no key is mentioned.

    Raises:
        ValueError: If fewer than two option keys are given.
    """

    keys = tuple(_ordered_unique(option_keys))

    if len(keys) < 2:
        raise ValueError("A ranking needs at least two option keys.")

    flags = 0 if _letter_mode(keys) else re.IGNORECASE
    longest_first = sorted(keys, key=len, reverse=True)
    alternatives = "|".join(re.escape(key) for key in longest_first)
    token = rf"\(?(?:{alternatives})\)?"
    chain = re.compile(
        rf"(?<![A-Za-z0-9]){token}(?:\s*[>≻]\s*{token})+(?![A-Za-z0-9])", flags
    )
    enumerated = re.compile(
        rf"^\s*\d+\s*[.)]\s*\(?({alternatives})\)?(?![A-Za-z0-9])", flags | re.MULTILINE
    )

    chains = [
        _ordered_unique(_mentions(match.group(0), keys))
        for match in chain.finditer(text)
    ]
    listed_keys = (_as_key(match.group(1), keys) for match in enumerated.finditer(text))
    listed = _ordered_unique(key for key in listed_keys if key is not None)

    for candidate in chains + [listed]:
        if set(candidate) == set(keys):
            return ParseOutcome(tuple(candidate), Confidence.EXACT, text)

    if chains:
        partial = max(chains, key=len)
    elif listed:
        partial = listed
    else:
        partial = _ordered_unique(_mentions(text, keys))

    if not partial:
        return ParseOutcome.fallback(text)

    tail = [key for key in sorted(keys) if key not in partial]

    return ParseOutcome(tuple(partial + tail), Confidence.HEURISTIC, text)
