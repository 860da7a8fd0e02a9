import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Mapping, Optional

import numpy as np
from frozendict import frozendict

from docteam.config import RunConfig
from docteam.errors import EmptyTableError, MissingGoldError
from docteam.query import ComplexityLevel, Query

if TYPE_CHECKING:
    from docteam.orchestrator import Orchestrator

logger = logging.getLogger(__name__)

LEVEL_MODES = {
    ComplexityLevel.LOW: "pcp",
    ComplexityLevel.MODERATE: "mdt",
    ComplexityLevel.HIGH: "ict",
}
"""The forced mode that runs the branch of each complexity level."""


def consensus_entropy(answers: Iterable[str]) -> float:
    """
    The Shannon entropy (in bits) of the distribution of answers. Zero when all
    answers agree, and ``log2(m)`` when ``m`` distinct answers are equally frequent.

    Args:
        answers: The answers, one per agent. Agents without an answer should enter as
            a symbol of their own.

    Raises:
        ValueError: If there are no answers.
    """

    answers = list(answers)

    if not answers:
        raise ValueError("Cannot compute the entropy of no answers.")

    _, counts = np.unique(np.array(answers, dtype=str), return_counts=True)
    probabilities = counts / counts.sum()
    entropy = float(-(probabilities * np.log2(probabilities)).sum())

    return max(0.0, entropy)


@dataclass(frozen=True)
class LevelSuccessTable:
    """
    Per problem, the empirical success rate when the problem is answered at each
    complexity level.

    Args:
        rates: Problem ids mapped to a success rate for every level.
        reps: How many runs each rate is based on.
    """

    rates: frozendict
    reps: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(
            self,
            "rates",
            frozendict(
                {
                    problem: frozendict(
                        {ComplexityLevel(level): float(p) for level, p in row.items()}
                    )
                    for problem, row in self.rates.items()
                }
            ),
        )

        if self.reps < 1:
            raise ValueError(f"Need at least one repetition, got {self.reps}.")

        for problem, row in self.rates.items():
            if set(row) != set(ComplexityLevel):
                raise ValueError(f"Problem {problem} needs a rate for every level.")

            if any(not 0 <= p <= 1 for p in row.values()):
                raise ValueError(f"Rates of problem {problem} must be in [0, 1].")

    def __len__(self) -> int:
        return len(self.rates)

    def ordered(self, problem: str) -> tuple[float, float, float]:
        """The rates of a problem from highest to lowest. Equal rates are ordered by
        level (``LOW`` first)."""

        row = self.rates[problem]
        levels = sorted(row, key=lambda level: (-row[level], level.rank))
        p_max, p_mid, p_min = (row[level] for level in levels)

        return p_max, p_mid, p_min


def expected_accuracy(a: float, b: float, c: float, table: LevelSuccessTable) -> float:
    """
    The expected accuracy of a complexity classifier that picks the best level with
    probability ``a``, the middle level with probability ``b`` and the worst level
    with probability ``c``: the mean over problems of
    ``a * p_max + b * p_mid + c * p_min``.

    Raises:
        ValueError: If any of ``a``, ``b`` and ``c`` is negative.
        EmptyTableError: If the table has no problems.
    """

    if min(a, b, c) < 0:
        raise ValueError("Level probabilities cannot be negative.")

    if len(table) == 0:
        raise EmptyTableError("Cannot compute expected accuracy over no problems.")

    total = 0.0

    for problem in table.rates:
        p_max, p_mid, p_min = table.ordered(problem)
        total += a * p_max + b * p_mid + c * p_min

    return total / len(table)


def estimate_level_success(
    query: Query,
    level: ComplexityLevel,
    reps: int,
    orchestrator: "Orchestrator",
    config: Optional[RunConfig] = None,
) -> float:
    """
    Estimate how often a query is answered correctly at a complexity level, by
    running the branch of that level ``reps`` times with distinct seeds.

    Args:
        query: The query, with a gold answer.
        level: The level whose branch to run.
        reps: The number of runs.
        orchestrator: The orchestrator to run with.
        config: The base configuration. Defaults to the orchestrator's.

    Returns:
        The fraction of correct runs.

    Raises:
        ValueError: If ``reps`` is not positive.
        MissingGoldError: If the query has no gold answer.
    """

    if reps < 1:
        raise ValueError(f"Need at least one repetition, got {reps}.")

    if query.gold is None:
        raise MissingGoldError(f"Query {query.id} has no gold answer.")

    base = config or orchestrator.config
    correct = 0

    for rep in range(reps):
        run_config = base.with_overrides(mode=LEVEL_MODES[level], seed=base.seed + rep)
        decision = orchestrator.run(query, run_config)
        correct += decision.answer == query.gold

    logger.debug("Query %s at %s: %d/%d correct", query.id, level.value, correct, reps)

    return correct / reps


def build_level_table(
    queries: Iterable[Query],
    reps: int,
    orchestrator: "Orchestrator",
    config: Optional[RunConfig] = None,
) -> LevelSuccessTable:
    """Estimate the success rate of every query at every level."""

    rates: dict[str, Mapping[ComplexityLevel, float]] = {}

    for query in queries:
        rates[query.id] = {
            level: estimate_level_success(query, level, reps, orchestrator, config)
            for level in ComplexityLevel
        }

    return LevelSuccessTable(rates=frozendict(rates), reps=reps)
