import math
from dataclasses import dataclass, field, fields
from typing import Any, Optional

from frozendict import frozendict

from docteam.agent import ExpertRoster
from docteam.query import ComplexityLevel
from docteam.transcript import Report, Transcript


@dataclass(frozen=True)
class CallStats:
    """Counts of backend usage. Only calls that were not served from cache count."""

    calls: int = 0
    prompt_chars: int = 0
    completion_chars: int = 0
    estimated_cost: float = 0.0
    """The estimated cost in USD, based on a price table."""

    def __post_init__(self) -> None:
        for stat in fields(self):
            if getattr(self, stat.name) < 0:
                raise ValueError(f"{stat.name} cannot be negative.")

    def __add__(self, other: "CallStats") -> "CallStats":
        return CallStats(
            calls=self.calls + other.calls,
            prompt_chars=self.prompt_chars + other.prompt_chars,
            completion_chars=self.completion_chars + other.completion_chars,
            estimated_cost=self.estimated_cost + other.estimated_cost,
        )

    def __sub__(self, other: "CallStats") -> "CallStats":
        return CallStats(
            calls=self.calls - other.calls,
            prompt_chars=self.prompt_chars - other.prompt_chars,
            completion_chars=self.completion_chars - other.completion_chars,
            estimated_cost=max(0.0, self.estimated_cost - other.estimated_cost),
        )

    def to_dict(self) -> dict[str, Any]:
        return {stat.name: getattr(self, stat.name) for stat in fields(self)}


@dataclass(frozen=True)
class Decision:  # pylint: disable=R0902
    """The final answer to a query, and how it came about."""

    answer: str
    """The answer, in canonical form."""

    method: str
    """How the answer was decided, e.g. ``"mdt:direct"`` or ``"solo:cot-sc"``."""

    complexity: ComplexityLevel
    """The complexity of the branch that was executed."""

    votes: frozendict = field(default_factory=frozendict)
    """Agent ids mapped to an ``(answer, weight)`` pair. The weight may be ``None``."""

    entropy_trace: tuple[tuple[int, float], ...] = ()
    """The consensus entropy (in bits) after each round."""

    stats: CallStats = field(default_factory=CallStats)
    elapsed: float = 0.0
    """Wall clock seconds spent on the query."""

    flags: tuple[str, ...] = ()

    transcript: Transcript = field(
        default_factory=Transcript, repr=False, compare=False
    )
    reports: tuple[Report, ...] = field(default=(), repr=False, compare=False)
    roster: Optional[ExpertRoster] = field(default=None, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "votes", frozendict(self.votes))
        object.__setattr__(
            self,
            "entropy_trace",
            tuple((int(r), float(h)) for r, h in self.entropy_trace),
        )

        if any(h < 0 or not math.isfinite(h) for _, h in self.entropy_trace):
            raise ValueError("Entropy values must be finite and non-negative.")

        if self.elapsed < 0:
            raise ValueError("Elapsed time cannot be negative.")

    def to_dict(self) -> dict[str, Any]:
        return {
            "answer": self.answer,
            "method": self.method,
            "complexity": self.complexity.value,
            "votes": {agent: list(vote) for agent, vote in self.votes.items()},
            "entropy_trace": [list(point) for point in self.entropy_trace],
            "stats": self.stats.to_dict(),
            "elapsed": self.elapsed,
            "flags": list(self.flags),
        }
