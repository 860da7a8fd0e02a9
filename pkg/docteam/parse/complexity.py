import re

from docteam.parse.outcome import Confidence, ParseOutcome
from docteam.query import ComplexityLevel

_LEVEL_WORD = re.compile(r"\b(low|moderate|high)\b", re.IGNORECASE)
_LEADING_NUMERAL = re.compile(r"^\s*\**\s*\(?\s*([123])\s*\)")

_NUMERALS = {
    "1": ComplexityLevel.LOW,
    "2": ComplexityLevel.MODERATE,
    "3": ComplexityLevel.HIGH,
}


def parse_complexity(text: str) -> ParseOutcome[ComplexityLevel]:
    """
    Parse a complexity classification.

    Args:
        text: The classifier output, which answers with ``1) low``, ``2) moderate``
            or ``3) high``.

    Returns:
        An exact outcome when exactly one level is named, a heuristic outcome when
        several levels are named but the output starts with a level numeral, and a
        fallback otherwise.
    """

    named = {match.group(1).casefold() for match in _LEVEL_WORD.finditer(text)}

    if len(named) == 1:
        return ParseOutcome(ComplexityLevel(named.pop()), Confidence.EXACT, text)

    numeral = _LEADING_NUMERAL.match(text)

    if numeral is not None:
        return ParseOutcome(
            _NUMERALS[numeral.group(1)],
            Confidence.HEURISTIC,
            text,
            warnings=(f"levels named: {', '.join(sorted(named)) or 'none'}",),
        )

    return ParseOutcome.fallback(text)
