from dataclasses import asdict, dataclass
from enum import Enum
from typing import Any, Iterator, Optional


class EventKind(Enum):
    """What an event in a transcript is."""

    OPINION = "opinion"
    MESSAGE = "message"
    FEEDBACK = "feedback"
    REPORT = "report"
    DECISION = "decision"
    CLASSIFICATION = "classification"
    RECRUITMENT = "recruitment"


@dataclass(frozen=True)
class TranscriptEvent:  # pylint: disable=R0902
    """A single model output, and where it sits in the collaboration."""

    round: int
    """The discussion round (or, for team pipelines, the team position)."""

    turn: int
    """The turn within the round."""

    speaker: str
    """The ``agent_id`` of the speaker, or ``moderator``, ``recruiter``, ``decider``."""

    recipient: str
    """The ``agent_id`` the event is addressed to, or ``all``."""

    raw: str
    """The output text, exactly as the backend returned it."""

    kind: EventKind

    extracted_answer: Optional[str] = None
    """The canonical answer parsed from ``raw``, if any."""

    sequence: int = 0
    """The position of the event in its transcript."""

    flags: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.round < 0 or self.turn < 0:
            raise ValueError("Round and turn must be non-negative.")

    @property
    def position(self) -> tuple[int, int, int]:
        return self.round, self.turn, self.sequence

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data["kind"] = self.kind.value
        data["flags"] = list(self.flags)

        return data


@dataclass(frozen=True)
class Report:
    """The synthesized report of a team in an integrated care pipeline."""

    team_name: str
    body: str
    produced_by: str
    """The ``agent_id`` of the team lead."""

    consumed_reports: tuple[str, ...] = ()
    """The names of the earlier teams whose reports this team was given."""

    def to_dict(self) -> dict[str, Any]:
        return {**asdict(self), "consumed_reports": list(self.consumed_reports)}


class Transcript:
    """
    The append-only log of everything that was said while answering a query.

    Events are totally ordered by ``(round, turn, sequence)``: an event can never be
    recorded at an earlier round or turn than the last one.
    """

    def __init__(self) -> None:
        self._events: list[TranscriptEvent] = []

    def record(  # pylint: disable=R0913
        self,
        kind: EventKind,
        speaker: str,
        raw: str,
        round_no: int = 0,
        turn: int = 0,
        recipient: str = "all",
        extracted_answer: Optional[str] = None,
        flags: tuple[str, ...] = (),
    ) -> TranscriptEvent:
        """
        Append an event.

        Args:
            kind: The kind of event.
            speaker: Who produced it.
            raw: The raw model output.
            round_no: The round the event belongs to.
            turn: The turn within the round.
            recipient: Who it is addressed to.
            extracted_answer: The answer parsed from the output, if any.
            flags: Any flags, e.g. ``"answer-fallback"``.

        Returns:
            The recorded event.

        Raises:
            ValueError: If the event would be ordered before the last recorded event.
        """

        if self._events and (round_no, turn) < self._events[-1].position[:2]:
            raise ValueError(
                f"Cannot record an event at round {round_no}, turn {turn} after "
                f"round {self._events[-1].round}, turn {self._events[-1].turn}."
            )

        event = TranscriptEvent(
            round=round_no,
            turn=turn,
            speaker=speaker,
            recipient=recipient,
            raw=raw,
            kind=kind,
            extracted_answer=extracted_answer,
            sequence=len(self._events),
            flags=tuple(flags),
        )

        self._events.append(event)

        return event

    @property
    def last_position(self) -> tuple[int, int]:
        """The ``(round, turn)`` of the last event, or ``(0, 0)`` if empty."""

        if not self._events:
            return 0, 0

        return self._events[-1].round, self._events[-1].turn

    def filter(
        self,
        kind: Optional[EventKind] = None,
        round_no: Optional[int] = None,
        speaker: Optional[str] = None,
    ) -> list[TranscriptEvent]:
        """Get the events matching all given criteria, in transcript order."""

        return [
            event
            for event in self._events
            if (kind is None or event.kind is kind)
            and (round_no is None or event.round == round_no)
            and (speaker is None or event.speaker == speaker)
        ]

    def to_list(self) -> list[dict[str, Any]]:
        return [event.to_dict() for event in self._events]

    def __iter__(self) -> Iterator[TranscriptEvent]:
        return iter(self._events)

    def __len__(self) -> int:
        return len(self._events)

    def __getitem__(self, index: int) -> TranscriptEvent:
        return self._events[index]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Transcript):
            return NotImplemented

        return self._events == other._events

    __hash__ = None  # type: ignore[assignment]
